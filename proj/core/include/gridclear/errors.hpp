#pragma once

#include <stdexcept>
#include <string>

namespace gridclear {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Feeder lines do not form a tree rooted at the head bus.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// A document or programmatic input violates its schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument lies outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Scenario or generation configuration is unusable.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on an object in the wrong state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Broken internal invariant; indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridclear
