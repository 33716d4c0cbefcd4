// include/sidoa/error.hpp

// Copyright 2026  sidoa authors

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

#pragma once

#include <stdexcept>
#include <string>

namespace sidoa {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration; raised before any side effect.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File system or format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// Model container problems. The three kinds are kept distinct so callers
// can tell a foreign file from a damaged one.
class NotAModelError : public IoError {
 public:
  using IoError::IoError;
};
class CorruptModelError : public IoError {
 public:
  using IoError::IoError;
};
class ModelVersionError : public IoError {
 public:
  using IoError::IoError;
};
class ParamCountError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace sidoa
