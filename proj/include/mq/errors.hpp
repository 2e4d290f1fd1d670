#pragma once

#include <stdexcept>
#include <string>

namespace mq {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement; message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf escaped an operation. Never silent.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Bad user-facing configuration (unknown key, invalid value, role set
// without Ego, head dimension that disagrees with the V2X set, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (open/read/write).
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/dataset/config combination that cannot work together.
class CompatError : public Error {
 public:
  using Error::Error;
};

// Binary codec failures, one type per failure mode so callers can tell
// them apart.
class CodecError : public Error {
 public:
  using Error::Error;
};

class MagicError : public CodecError {
 public:
  using CodecError::CodecError;
};

class VersionError : public CodecError {
 public:
  using CodecError::CodecError;
};

class TruncationError : public CodecError {
 public:
  using CodecError::CodecError;
};

class DtypeError : public CodecError {
 public:
  using CodecError::CodecError;
};

class DimOverflowError : public CodecError {
 public:
  using CodecError::CodecError;
};

}  // namespace mq
