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

// The socket API under test: listening server channels, connection channels
// and selectors, each usable in blocking or non-blocking mode.
//
// Legal operations per channel state (anything else raises the listed kind):
//
//   server  open-unbound : bind, configureBlocking, register, close;
//                          accept/getLocalPort -> NotYetBound
//   server  bound        : accept, getLocalPort, configureBlocking,
//                          register, close; bind -> AlreadyBound
//   server  closed       : close (no-op); everything else -> ClosedChannel
//   conn    connected    : everything
//   conn    input shut   : read -> InputShutdown
//   conn    output shut  : write -> OutputShutdown
//   conn    closed       : close (no-op); everything else -> ClosedChannel
//
// configureBlocking(true) on a channel registered with a selector raises
// IllegalBlockingMode, as does registering a channel in blocking mode.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "netmbt/errors.hpp"
#include "netmbt/handles.hpp"

namespace netmbt {

enum Interest : std::uint8_t {
  kAccept = 1,
  kRead = 2,
  kWrite = 4,
};

using InterestSet = std::uint8_t;

using ChannelRef = std::variant<ServerId, ConnId>;

struct ReadResult {
  bool end_of_stream = false;
  std::vector<std::byte> data;

  std::size_t count() const { return data.size(); }

  static ReadResult eos() { return ReadResult{true, {}}; }
};

struct ReadyKey {
  SelectorKey key;
  InterestSet ready = 0;

  friend bool operator==(const ReadyKey&, const ReadyKey&) = default;
};

/// Keys ready for at least one of their interest ops, ordered by key.
using ReadinessSet = std::vector<ReadyKey>;

inline bool contains_ready(const ReadinessSet& set, SelectorKey key, Interest op) {
  for (const auto& r : set) {
    if (r.key == key) return (r.ready & op) != 0;
  }
  return false;
}

class SocketApi {
 public:
  virtual ~SocketApi() = default;

  virtual ServerId open_server() = 0;
  /// Binds and starts listening. Port 0 picks an ephemeral port.
  virtual Port bind(ServerId server, Port port) = 0;
  virtual Port local_port(ServerId server) = 0;
  virtual std::optional<ConnId> accept(ServerId server) = 0;
  virtual void close(ServerId server) = 0;

  /// Connects to the loopback listener at `port`; the connection is queued
  /// at the server before accept runs.
  virtual ConnId connect(Port port) = 0;
  virtual ReadResult read(ConnId conn, std::size_t capacity) = 0;
  virtual std::size_t write(ConnId conn, std::span<const std::byte> payload) = 0;
  virtual void shutdown_input(ConnId conn) = 0;
  virtual void shutdown_output(ConnId conn) = 0;
  virtual void close(ConnId conn) = 0;
  virtual Port local_port(ConnId conn) = 0;
  virtual Port remote_port(ConnId conn) = 0;

  virtual void configure_blocking(ChannelRef channel, bool blocking) = 0;
  virtual bool is_blocking(ChannelRef channel) = 0;

  virtual SelectorId open_selector() = 0;
  virtual SelectorKey register_channel(SelectorId selector, ChannelRef channel,
                                       InterestSet interest) = 0;
  virtual void deregister(SelectorId selector, SelectorKey key) = 0;
  virtual ReadinessSet select_now(SelectorId selector) = 0;
  virtual void close(SelectorId selector) = 0;

  /// One explorer step has passed. Simulated time advances; real sockets
  /// ignore it.
  virtual void tick() = 0;
  /// Closes every channel and selector opened through this instance.
  virtual void close_all() = 0;
};

}  // namespace netmbt
