#pragma once

#include <stdexcept>
#include <string>

namespace resim {

// Base class for all engine errors. Subtypes map 1:1 onto C API status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched array/image dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented range.
class BoundError : public Error {
 public:
  using Error::Error;
};

// Invalid mesh or chain connectivity (isolated vertex, bad parent order, ...).
class TopologyError : public Error {
 public:
  using Error::Error;
};

// Zero-area face, zero total area, non-unit direction and friends.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// Mask with no foreground pixels.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

// Operation invoked against stale or missing retained state.
class StateError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// File system / serialization failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace resim
