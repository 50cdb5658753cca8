// Copyright 2026 The STCCL Authors.
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

namespace stccl {

// Base error. `code()` is the machine-readable tag emitted by the CLI as
// {"error": code, "message": ...} on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }
  // CLI exit code: 2 = usage/config/argument, 3 = runtime/numeric.
  virtual int exit_code() const { return 3; }

 private:
  std::string code_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& message, std::string code = "argument")
      : Error(std::move(code), message) {}
  int exit_code() const override { return 2; }
};

class IndexError : public ArgumentError {
 public:
  explicit IndexError(const std::string& message) : ArgumentError(message, "index") {}
};

class ConfigError : public ArgumentError {
 public:
  explicit ConfigError(const std::string& message) : ArgumentError(message, "config") {}
};

class IoError : public ArgumentError {
 public:
  explicit IoError(const std::string& message, std::string code = "io")
      : ArgumentError(message, std::move(code)) {}
};

class DegeneracyError : public ArgumentError {
 public:
  explicit DegeneracyError(const std::string& message) : ArgumentError(message, "degenerate") {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

}  // namespace stccl
