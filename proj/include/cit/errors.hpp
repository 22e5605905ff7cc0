// Copyright 2026 The CIT Workbench Authors
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

#ifndef CIT_ERRORS_HPP
#define CIT_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an op's shape rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed, degenerate statistics, failed solves.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Bad user input: configs, files, out-of-range ids, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cit

#endif  // CIT_ERRORS_HPP
