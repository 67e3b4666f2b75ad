// Copyright 2026 The TreeQ Authors
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

namespace treeq {

// Base of every error raised by the library. The CLI maps subclasses of
// UserError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UserError : public Error {
 public:
  using Error::Error;
};

class InvalidDimension : public UserError {
 public:
  using UserError::UserError;
};

class InvalidRank : public UserError {
 public:
  using UserError::UserError;
};

class InvalidBits : public UserError {
 public:
  using UserError::UserError;
};

class InvalidPartition : public UserError {
 public:
  using UserError::UserError;
};

class InvalidAllocation : public UserError {
 public:
  using UserError::UserError;
};

class InfeasibleBudget : public UserError {
 public:
  using UserError::UserError;
};

// Schema / config violation; `field()` names the offending JSON path.
class ConfigError : public UserError {
 public:
  ConfigError(std::string field, const std::string& what)
      : UserError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace treeq
