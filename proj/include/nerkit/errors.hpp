// Copyright 2026 The nerkit Authors.
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

#ifndef NERKIT_ERRORS_HPP_
#define NERKIT_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nerkit {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An id is outside the range of the table it indexes.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or usage (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Text input error carrying a 1-based line number (0 when unknown).
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(line == 0 ? what
                            : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Binary file error carrying the byte offset where decoding failed.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : DataError("byte offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Gold and predicted corpora do not line up.
class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

// Loss or gradient became non-finite during training (CLI exit code 3).
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace nerkit

#endif  // NERKIT_ERRORS_HPP_
