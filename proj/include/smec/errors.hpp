#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smec {

/// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside its mathematical domain (discount >= 1, temperature <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Policy or table shape incompatible with the MDP it is used with.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed maze text; row/column are 0-based, -1 when not applicable.
class LayoutError : public Error {
 public:
  LayoutError(const std::string& what, int row = -1, int col = -1)
      : Error(what + (row >= 0 ? " (row " + std::to_string(row) +
                                     (col >= 0 ? ", col " + std::to_string(col) : "") + ")"
                               : "")),
        row_(row),
        col_(col) {}
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_;
  int col_;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Configuration rejected by schema validation; `path` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Run-log file that cannot be parsed; `offset` is the byte offset of the bad record.
class CorruptLogError : public Error {
 public:
  CorruptLogError(std::size_t offset, const std::string& what)
      : Error("corrupt log at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Planner asked to switch away from a segment boundary.
class SwitchError : public Error {
 public:
  using Error::Error;
};

/// A theorem construction whose preconditions cannot be met on the given instance.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

}  // namespace smec
