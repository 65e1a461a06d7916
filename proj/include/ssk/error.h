// ssk/error.h

// Copyright 2026  ssk authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SSK_ERROR_H_
#define SSK_ERROR_H_

#include <stdexcept>
#include <string>

namespace ssk {

/// Base of every error thrown by the library. The CLI maps subclasses to exit
/// codes; everything else is a plain failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file contents (WAV headers, checkpoints, lists).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input too short for the requested framing or cropping.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Zero power, zero norm, empty filter and similar inputs with no defined output.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssk

#endif  // SSK_ERROR_H_
