#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fewboost {

// Root of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what + " (row " + std::to_string(row) + ", column " +
              std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// Precondition violated by caller-supplied data or parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Metric requested on data where it has no definition (single-class AUC,
// constant-target R2).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace fewboost
