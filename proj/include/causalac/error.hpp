#pragma once

#include <stdexcept>
#include <string>

namespace causalac {

// Base class for every error raised by the library. The CLI maps these to
// exit code 2 (input error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent model document / graph.
class ModelError : public Error {
 public:
  using Error::Error;
};

// Malformed circuit document, dataset or query.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  explicit FormatError(const std::string& what) : FormatError(what, 0) {}

  int line() const { return line_; }

 private:
  int line_ = 0;
};

// Misuse of a jointree or circuit (mismatched graph, bad replica counts...).
class StructureError : public Error {
 public:
  using Error::Error;
};

// An identifiability formula needed a conditional on a zero-probability cell.
class UndefinedEstimand : public Error {
 public:
  using Error::Error;
};

// EM hit a record with zero probability under the current parameters.
class ZeroLikelihood : public Error {
 public:
  ZeroLikelihood(std::size_t record)
      : Error("record " + std::to_string(record) +
              " has zero probability under the current parameters"),
        record_(record) {}

  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

}  // namespace causalac
