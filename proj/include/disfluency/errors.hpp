// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace disfluency {

/// Base of every error raised by the library. The CLI maps DataError
/// subclasses to exit code 2 and everything else to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with user-supplied data or files, as opposed to internal faults.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedFormat : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class TooShort : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDataset : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateDataset : public DataError {
 public:
  using DataError::DataError;
};

class SpecError : public DataError {
 public:
  using DataError::DataError;
};

class VersionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class EmptyHistogram : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace disfluency
