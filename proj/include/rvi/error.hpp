#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rvi {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fewer bytes than the instruction width at the decode position.
class TruncatedCode : public Error {
 public:
  using Error::Error;
};

/// An immediate or jump offset does not fit the target encoding.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A condition the planner or code generator should have excluded upstream.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Runtime blobs cannot be placed within reach of the patches that use them.
class PlacementError : public Error {
 public:
  using Error::Error;
};

}  // namespace rvi
