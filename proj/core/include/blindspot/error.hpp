#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace blindspot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An estimator was asked for a result without any observations.
class NoData : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Configuration document does not match its schema. `field()` is a JSON
// pointer-like path to the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Well-formed request that cannot be satisfied (e.g. too many pairs or
// removals for the graph).
class Infeasible : public Error {
 public:
  using Error::Error;
};

}  // namespace blindspot
