#pragma once

#include <stdexcept>
#include <string>

namespace uniconn {

/// Base class of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape_mismatch", message) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error("domain_error", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message, std::string path = {})
      : Error("io_error", message), path_(std::move(path)) {}
  IoError(std::string kind, const std::string& message, std::string path)
      : Error(std::move(kind), message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class MissingFileError : public IoError {
 public:
  explicit MissingFileError(const std::string& path)
      : IoError("missing_file", "file not found: " + path, path) {}
};

class FormatError : public IoError {
 public:
  FormatError(const std::string& message, std::string path = {})
      : IoError("format_error", message, std::move(path)) {}
};

class AsymmetryError : public Error {
 public:
  AsymmetryError(const std::string& where, int row, int col)
      : Error("asymmetric_matrix", where + ": matrix not symmetric at (" + std::to_string(row) +
                                       ", " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  int row() const noexcept { return row_; }
  int col() const noexcept { return col_; }

 private:
  int row_;
  int col_;
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& message) : Error("non_finite", message) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

class RankError : public Error {
 public:
  explicit RankError(const std::string& message) : Error("rank_error", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("invalid_config", message) {}
};

}  // namespace uniconn
