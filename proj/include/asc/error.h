// asc/error.h

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

#ifndef ASC_ERROR_H_
#define ASC_ERROR_H_

#include <stdexcept>
#include <string>

namespace asc {

// Error taxonomy maps onto the CLI exit-code contract:
//   ConfigError / DimensionError -> 2, IoError / DataError -> 3,
//   NumericError -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Bad configuration, bad usage, or inputs inconsistent with configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string &msg) : Error(msg) {}
};

// Shape/extent mismatches between tensors or between data and model.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string &msg) : Error(msg) {}
};

// Filesystem and file-format failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string &msg) : Error(msg) {}
};

// Dataset-level problems (missing cache entries, malformed manifests).
class DataError : public Error {
 public:
  explicit DataError(const std::string &msg) : Error(msg) {}
};

// Non-finite values or failed numeric checks.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string &msg) : Error(msg) {}
};

}  // namespace asc

#endif  // ASC_ERROR_H_
