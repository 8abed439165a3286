#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace neuralcanvas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or matrix dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Network topology or weight set is incomplete or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation called with state that does not support it (e.g. a gradient for a
// layer the activation record never computed).
class StateError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Weight file has the wrong magic, version or layout.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

// Weight file checksum does not match its contents.
class CorruptionError : public IoError {
 public:
  using IoError::IoError;
};

// Weight file ended early. offset() is the byte position where more data was
// expected.
class TruncationError : public IoError {
 public:
  TruncationError(const std::string& what, std::uint64_t offset)
      : IoError(what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace neuralcanvas
