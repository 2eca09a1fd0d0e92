//
// Copyright 2026 The dpwo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPWO_ERROR_HPP_
#define DPWO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dpwo {

// Base class for every error raised by the library. Callers that only care
// about "did it work" can catch this; the subclasses exist so that the CLI
// and tests can tell input problems apart from numerical ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-range arguments (bad k, bad density, j out of range...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// File parsing and file system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Eigensolver non-convergence, near-singular inverses, rank deficiency.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpwo

#endif  // DPWO_ERROR_HPP_
