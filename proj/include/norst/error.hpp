#pragma once

#include <stdexcept>
#include <string>

namespace norst {

// Broad failure classes. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  kInvalidArgument,
  kNumerical,
  kIo,
  kParse,
  kConfig,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCategory::kInvalidArgument, what) {}
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::kNumerical, what) {}
};

// Input columns do not span a subspace of the requested dimension.
class DegenerateSubspace : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A normal-equation matrix on a support set is (numerically) singular.
class SingularSystem : public NumericalError {
 public:
  SingularSystem(const std::string& what, double min_eigenvalue)
      : NumericalError(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(ErrorCategory::kParse, what), line_(line) {}
  // 1-based line (text files) or row (binary containers); 0 when unknown.
  long line() const noexcept { return line_; }

 private:
  long line_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

}  // namespace norst
