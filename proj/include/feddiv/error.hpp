#pragma once

#include <stdexcept>
#include <string>

namespace feddiv {

enum class ErrorKind {
  validation,
  shape_mismatch,
  io,
  bad_magic,
  truncated,
  count_mismatch,
  config,
};

const char* error_kind_name(ErrorKind kind);

// Base error for everything the library reports. `where` names the offending
// field, layer or file when one is known.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string where = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& where() const noexcept { return where_; }

 private:
  ErrorKind kind_;
  std::string where_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::string where = {})
      : Error(ErrorKind::validation, message, std::move(where)) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message, std::string where = {})
      : Error(ErrorKind::shape_mismatch, message, std::move(where)) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message, std::string where = {})
      : Error(ErrorKind::io, message, std::move(where)) {}
};

// Malformed IDX or blob input. kind() distinguishes bad magic, truncation and
// image/label count mismatch.
class FormatError : public Error {
 public:
  FormatError(ErrorKind kind, const std::string& message, std::string where = {})
      : Error(kind, message, std::move(where)) {}
};

// Experiment configuration problem; where() is a JSON path such as
// "federation.n_clients".
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string path = {})
      : Error(ErrorKind::config, message, std::move(path)) {}
};

}  // namespace feddiv
