// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gnv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, shape mismatch between a block and its inputs,
/// or an incompatible state.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind {
    kNotFound,
    kBadMagic,
    kUnsupportedVersion,
    kShapeMismatch,
    kTruncated,
    kTrailingBytes,
    kMalformed,
  };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace gnv
