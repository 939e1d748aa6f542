#pragma once

#include <stdexcept>
#include <string>

namespace laser {

enum class ErrorKind {
  AllColumnsDegenerate,
  RankTooLarge,
  NotOrthonormal,
  DimensionMismatch,
  DegenerateInit,
  DegenerateReference,
  ShapeMismatch,
  UninitializedTracker,
  TapeMismatch,
  NonFiniteLoss,
  Unreachable,
  CorruptFile,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Thrown by dataset/checkpoint readers; carries the byte offset where decoding failed.
class CorruptFileError : public Error {
 public:
  CorruptFileError(std::size_t offset, const std::string& what)
      : Error(ErrorKind::CorruptFile, what + " at byte " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace laser
