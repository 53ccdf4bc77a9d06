#pragma once

#include <stdexcept>
#include <string>

namespace narrownet {

// Base for every domain failure; the CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: dimension mismatches, non-finite inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed fixture or certificate document. `field` names the offending key.
class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error("schema error at '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace narrownet
