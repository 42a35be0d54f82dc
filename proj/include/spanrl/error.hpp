/*
 * Copyright (c) 2026, The spanrl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace spanrl {

// Failure classes. The CLI maps each one to its own exit code.
enum class ErrorKind { Input, Config, Numeric, Budget, Invariant };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error input_error(const std::string& m) { return Error(ErrorKind::Input, m); }
inline Error config_error(const std::string& m) { return Error(ErrorKind::Config, m); }
inline Error numeric_error(const std::string& m) { return Error(ErrorKind::Numeric, m); }
inline Error budget_error(const std::string& m) { return Error(ErrorKind::Budget, m); }
inline Error invariant_error(const std::string& m) { return Error(ErrorKind::Invariant, m); }

// Process exit status for each failure class.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Input:
    case ErrorKind::Config: return 2;
    case ErrorKind::Numeric:
    case ErrorKind::Budget: return 3;
    case ErrorKind::Invariant: return 4;
  }
  return 1;
}

#define SPANRL_REQUIRE(cond, factory, msg) \
  do {                                     \
    if (!(cond)) throw factory(msg);       \
  } while (0)

}  // namespace spanrl
