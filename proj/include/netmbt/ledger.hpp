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
#include <cstdint>
#include <string>
#include <vector>

#include "netmbt/errors.hpp"
#include "netmbt/handles.hpp"
#include "netmbt/socket_api.hpp"

namespace netmbt {

enum class Side : std::uint8_t { Client = 0, Server = 1 };

inline Side peer_of(Side s) { return s == Side::Client ? Side::Server : Side::Client; }

inline const char* to_string(Side s) { return s == Side::Client ? "client" : "server"; }

/// Model-side view of one endpoint of a connection.
struct EndpointLedger {
  std::uint64_t wrote = 0;
  std::uint64_t read = 0;
  bool input_shut = false;
  bool output_shut = false;
  bool closed = false;
  int owner = 0;  // instance id, 0 while unattached
};

struct ConnectionLedger {
  Port client_port = 0;
  Port server_port = 0;
  std::array<EndpointLedger, 2> side;

  EndpointLedger& at(Side s) { return side[static_cast<std::size_t>(s)]; }
  const EndpointLedger& at(Side s) const { return side[static_cast<std::size_t>(s)]; }
};

/// Per-connection byte accounting used as the test oracle. Reads may return
/// fewer bytes than were written (latency); never more. Each entry is only
/// touched by the two instances that own its endpoints.
class OracleLedger {
 public:
  /// With `strict_eof`, end of stream additionally requires that every byte
  /// written by the peer has been read.
  explicit OracleLedger(bool strict_eof = false) : strict_eof_(strict_eof) {}

  std::size_t open(Port client_port, Port server_port, int client_instance) {
    ConnectionLedger c;
    c.client_port = client_port;
    c.server_port = server_port;
    c.at(Side::Client).owner = client_instance;
    entries_.push_back(c);
    return entries_.size() - 1;
  }

  /// Binds the server endpoint of the connection initiated from
  /// `client_port` to the worker instance that handles it.
  std::size_t attach_server(Port client_port, int worker_instance) {
    for (std::size_t id = entries_.size(); id-- > 0;) {
      auto& c = entries_[id];
      if (c.client_port != client_port || c.at(Side::Server).owner != 0) continue;
      require(!c.at(Side::Server).closed,
              "accepted connection " + std::to_string(id) + " after its listener closed");
      c.at(Side::Server).owner = worker_instance;
      return id;
    }
    throw PropertyViolation("accepted a connection from port " + std::to_string(client_port) +
                            " that no client initiated");
  }

  void record_write(std::size_t id, Side side, int instance, std::size_t n) {
    touch(id, side, instance).wrote += n;
  }

  /// Checks a read result against the bytes the peer is known to have
  /// written, then accounts for it.
  void check_read(std::size_t id, Side side, int instance, const ReadResult& r) {
    auto& self = touch(id, side, instance);
    const auto& peer = entries_[id].at(peer_of(side));
    const std::uint64_t outstanding = peer.wrote - self.read;
    if (r.end_of_stream) {
      require(peer.output_shut || peer.closed,
              std::string(to_string(side)) + " read end of stream on connection " +
                  std::to_string(id) + " but the " + to_string(peer_of(side)) +
                  " output is still open");
      if (strict_eof_) {
        require(outstanding == 0, std::string(to_string(side)) +
                                      " read end of stream with " + std::to_string(outstanding) +
                                      " bytes outstanding on connection " + std::to_string(id));
      }
      return;
    }
    require(r.count() <= outstanding,
            std::string(to_string(side)) + " read exceeds ledger on connection " +
                std::to_string(id) + ": read " + std::to_string(r.count()) + " bytes, only " +
                std::to_string(outstanding) + " outstanding");
    self.read += r.count();
  }

  /// A reset is only legitimate once the peer has closed, or has shut both
  /// directions (data arriving at such a socket is answered with a reset).
  void check_reset(std::size_t id, Side side, int instance) {
    touch(id, side, instance);
    const auto& peer = entries_[id].at(peer_of(side));
    require(peer.closed || (peer.input_shut && peer.output_shut),
            std::string(to_string(side)) + " saw a connection reset on connection " +
                std::to_string(id) + " while the " + to_string(peer_of(side)) + " is open");
  }

  /// Readiness soundness: READ reported while nothing is outstanding and
  /// the peer output is open is a phantom.
  void check_read_ready(std::size_t id, Side side, int instance) {
    auto& self = touch(id, side, instance);
    const auto& peer = entries_[id].at(peer_of(side));
    require(peer.wrote > self.read || peer.output_shut || peer.closed,
            std::string(to_string(side)) + " selector reported READ on connection " +
                std::to_string(id) + " with no data outstanding");
  }

  void input_shut(std::size_t id, Side side, int instance) {
    touch(id, side, instance).input_shut = true;
  }

  void output_shut(std::size_t id, Side side, int instance) {
    touch(id, side, instance).output_shut = true;
  }

  void closed(std::size_t id, Side side, int instance) {
    auto& e = touch(id, side, instance);
    e.closed = true;
    e.input_shut = true;
    e.output_shut = true;
  }

  /// The listener at `server_port` closed: connections it never accepted
  /// are closed from the server side.
  void listener_closed(Port server_port) {
    for (auto& c : entries_) {
      if (c.server_port == server_port && c.at(Side::Server).owner == 0) {
        c.at(Side::Server).closed = true;
        c.at(Side::Server).input_shut = true;
        c.at(Side::Server).output_shut = true;
      }
    }
  }

  const ConnectionLedger& at(std::size_t id) const { return entries_.at(id); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void reset() { entries_.clear(); }

 private:
  EndpointLedger& touch(std::size_t id, Side side, int instance) {
    if (id >= entries_.size()) throw PropertyViolation("unknown ledger entry " + std::to_string(id));
    auto& e = entries_[id].at(side);
    require(e.owner == instance, "instance " + std::to_string(instance) + " touched the " +
                                     to_string(side) + " side of connection " +
                                     std::to_string(id) + " owned by instance " +
                                     std::to_string(e.owner));
    return e;
  }

  bool strict_eof_;
  std::vector<ConnectionLedger> entries_;
};

}  // namespace netmbt
