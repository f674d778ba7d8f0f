#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgxmr {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A block's authentication tag did not verify.
class AuthenticationError : public Error {
 public:
  explicit AuthenticationError(std::uint64_t block_index)
      : Error("authentication failed for block " + std::to_string(block_index)),
        block_index_(block_index) {}

  std::uint64_t block_index() const noexcept { return block_index_; }

 private:
  std::uint64_t block_index_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class RecordTooLarge : public Error {
 public:
  using Error::Error;
};

class InvalidBlockSize : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class UnknownBuffer : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class StashOverflow : public Error {
 public:
  using Error::Error;
};

/// Wraps an exception thrown from user map code. The original exception is
/// nested and can be recovered with std::rethrow_if_nested.
class UdfError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace sgxmr
