#pragma once

#include <stdexcept>
#include <string>

namespace opal {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input file: parse failures, missing columns, truncated binaries.
class IoError : public Error {
 public:
  using Error::Error;
};

// Schema-level problem (missing required column, wrong magic/version).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training blew up: non-finite loss/gradient, zero-norm embedding row.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Shape mismatch between a query/checkpoint and the catalog it targets.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace opal
