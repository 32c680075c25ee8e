// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace uapforge {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk data (bad magic, truncated, count mismatch).
class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A file the operation depends on does not exist.
class MissingFileError : public IoError {
public:
    using IoError::IoError;
};

/// Training loss became non-finite. Carries the 1-based epoch.
class DivergenceError : public NumericError {
public:
    DivergenceError(int epoch, const std::string& what)
        : NumericError(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace uapforge
