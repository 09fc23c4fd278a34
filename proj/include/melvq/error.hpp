// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace melvq {

/// Error classes. The CLI maps each one to a distinct exit status.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kFormat,
  kSampleRate,
  kHashMismatch,
  kModeMismatch,
  kInsufficientData,
  kTooShort,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace melvq
