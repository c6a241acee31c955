#pragma once

#include <stdexcept>
#include <string>

namespace rigfit {

enum class ErrorKind {
  Validation,
  Parse,
  Io,
  Internal,
};

// Base for every structured failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept {
    return kind_;
  }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// Text-format failure with a 1-based source location.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column)
      : Error(ErrorKind::Parse, format(message, line, column)),
        message_(message),
        line_(line),
        column_(column) {}

  const std::string& message() const noexcept {
    return message_;
  }
  int line() const noexcept {
    return line_;
  }
  int column() const noexcept {
    return column_;
  }

 private:
  static std::string format(const std::string& message, int line, int column) {
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message;
  }

  std::string message_;
  int line_;
  int column_;
};

} // namespace rigfit
