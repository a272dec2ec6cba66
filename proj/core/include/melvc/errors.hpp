// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace melvc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data-level failures (malformed files, bad values). The CLI maps these to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

class ParamError : public Error {
 public:
  using Error::Error;
};

class TooShortError : public ParamError {
 public:
  using ParamError::ParamError;
};

class ShapeError : public ParamError {
 public:
  using ParamError::ParamError;
};

class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

class StabilityError : public Error {
 public:
  using Error::Error;
};

class DivergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace melvc
