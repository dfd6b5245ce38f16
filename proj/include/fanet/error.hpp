#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fanet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or pyramid geometry do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A model/train/scene configuration violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// User-supplied values (flags, labels, counts) are out of range.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents; `offset` is the byte position where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace fanet
