#pragma once

#include <stdexcept>
#include <string>

namespace splatalign {

// Root of every error raised by the library. Subclasses let callers and
// tests distinguish the diagnostic without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed text or structure (PLY header line, JSON, magic bytes).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Payload shorter or longer than its header promises.
class SizeMismatchError : public Error {
 public:
  using Error::Error;
};

// A required field or property is absent.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class EmptyCloudError : public Error {
 public:
  using Error::Error;
};

class DanglingKeyError : public Error {
 public:
  using Error::Error;
};

class DuplicateKeyError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked out of order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace splatalign
