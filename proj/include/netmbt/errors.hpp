// Copyright 2026 The netmbt Authors
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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace netmbt {

/// Error conditions raised by the socket API under test. The set is closed so
/// models can map every kind to a state through exception overrides.
enum class ErrorKind : std::uint8_t {
  ClosedChannel,
  AlreadyBound,
  NotYetBound,
  ConnectionRefused,
  InputShutdown,
  OutputShutdown,
  IllegalBlockingMode,
  IllegalArgument,
  ConnectionReset,
  AddressInUse,
};

inline constexpr std::array<ErrorKind, 10> kAllErrorKinds = {
    ErrorKind::ClosedChannel,       ErrorKind::AlreadyBound,
    ErrorKind::NotYetBound,         ErrorKind::ConnectionRefused,
    ErrorKind::InputShutdown,       ErrorKind::OutputShutdown,
    ErrorKind::IllegalBlockingMode, ErrorKind::IllegalArgument,
    ErrorKind::ConnectionReset,     ErrorKind::AddressInUse,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ClosedChannel: return "ClosedChannel";
    case ErrorKind::AlreadyBound: return "AlreadyBound";
    case ErrorKind::NotYetBound: return "NotYetBound";
    case ErrorKind::ConnectionRefused: return "ConnectionRefused";
    case ErrorKind::InputShutdown: return "InputShutdown";
    case ErrorKind::OutputShutdown: return "OutputShutdown";
    case ErrorKind::IllegalBlockingMode: return "IllegalBlockingMode";
    case ErrorKind::IllegalArgument: return "IllegalArgument";
    case ErrorKind::ConnectionReset: return "ConnectionReset";
    case ErrorKind::AddressInUse: return "AddressInUse";
  }
  return "Unknown";
}

inline std::optional<ErrorKind> parse_error_kind(std::string_view text) {
  for (ErrorKind kind : kAllErrorKinds) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

/// Raised by a socket backend. The OS error, when there is one, travels in
/// `detail` for diagnostics only.
class SutError : public std::runtime_error {
 public:
  SutError(ErrorKind kind, std::string detail = {})
      : std::runtime_error(std::string(to_string(kind)) +
                           (detail.empty() ? "" : ": " + detail)),
        kind_(kind),
        detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// A failed assertion inside a model action. Ends the current test.
class PropertyViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structural problem in a model definition.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The environment could not run tests at all (no sockets, no ports). Never a
/// test verdict.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PoolExhaustedError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// A blocking call could not complete within the watchdog bound.
class WatchdogExpired : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step_index, std::string expected,
                  std::string actual)
      : std::runtime_error("replay diverged at step " +
                           std::to_string(step_index) + ": expected '" +
                           expected + "', got '" + actual + "'"),
        step_index_(step_index),
        expected_(std::move(expected)),
        actual_(std::move(actual)) {}

  std::size_t step_index() const noexcept { return step_index_; }
  const std::string& expected() const noexcept { return expected_; }
  const std::string& actual() const noexcept { return actual_; }

 private:
  std::size_t step_index_;
  std::string expected_;
  std::string actual_;
};

/// Throws PropertyViolation when `condition` is false.
inline void require(bool condition, const std::string& message) {
  if (!condition) throw PropertyViolation(message);
}

}  // namespace netmbt
