#pragma once

#include <stdexcept>
#include <string>

namespace kforge {

// Exit codes of the command line tool map onto these categories.
enum class ErrorKind { validation = 1, missing_input = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string &what) : Error(ErrorKind::validation, what) {}
};

class MissingInputError : public Error {
public:
  explicit MissingInputError(const std::string &what) : Error(ErrorKind::missing_input, what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string &what) : Error(ErrorKind::numerical, what) {}
};

/// Malformed, truncated or corrupted .kfrg / trajectory files.
class FormatError : public ValidationError {
public:
  explicit FormatError(const std::string &what) : ValidationError(what) {}
};

inline void require(bool cond, const std::string &msg) {
  if (!cond) throw ValidationError(msg);
}

} // namespace kforge
