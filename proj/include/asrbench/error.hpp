// Copyright 2026 The asrbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace asrbench {

/// Base of every error raised by the library. Each subclass names one
/// failure kind so callers (and the CLI's exit-code mapping) can dispatch on
/// type rather than on message text.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Sequence shorter than the convolution width or the analysis window.
class InputTooShort : public Error {
 public:
  using Error::Error;
};

/// Backward requested without a cached forward pass.
class StateError : public Error {
 public:
  using Error::Error;
};

class InvalidTranscript : public Error {
 public:
  using Error::Error;
};

/// Label cannot be aligned in the available number of frames.
class InfeasibleLabel : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public DataError {
 public:
  using DataError::DataError;
};

class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedFile : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedFormat : public DataError {
 public:
  using DataError::DataError;
};

class PipelineError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace asrbench
