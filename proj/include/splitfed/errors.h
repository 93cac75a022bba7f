// Copyright 2026 The Splitfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPLITFED_ERRORS_H_
#define SPLITFED_ERRORS_H_

#include <stdexcept>
#include <string>

namespace splitfed {

// Root of the error hierarchy. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or rank disagreement.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (even kernel widths, bad mode indices, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where a finite value is required, or a failed numeric contract.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Message-passing failures: timeouts, malformed frames, payload audit hits.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Input data problems (CSV gaps, zero variance, short series).
class DataError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/config incompatibility.
class VersionError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

}  // namespace splitfed

#endif  // SPLITFED_ERRORS_H_
