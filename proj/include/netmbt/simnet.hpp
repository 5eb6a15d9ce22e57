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

// Deterministic in-memory socket backend. Time is counted in explorer steps;
// every write draws a latency and a cohort split from the network's own rng,
// so partial and delayed reads happen reproducibly.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "netmbt/errors.hpp"
#include "netmbt/rng.hpp"
#include "netmbt/socket_api.hpp"

namespace netmbt::sim {

enum class FaultKind { DuplicateBytes, DropBytes, PhantomReadiness };

inline std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::DuplicateBytes: return "duplicate-bytes";
    case FaultKind::DropBytes: return "drop-bytes";
    case FaultKind::PhantomReadiness: return "phantom-readiness";
  }
  return "unknown";
}

/// One deliberate defect. It fires once, at the first opportunity at or
/// after `trigger_step`:
///   DuplicateBytes   the first cohort delivered is delivered twice
///   DropBytes        the first cohort written is never delivered
///   PhantomReadiness one select reports READ on a flow with nothing to read
struct FaultSpec {
  FaultKind kind = FaultKind::DuplicateBytes;
  std::uint64_t trigger_step = 0;
};

/// Per-write latency distribution over {0, 1, 2} steps, plus whether a write
/// may be split into two availability cohorts.
struct LatencyModel {
  std::array<double, 3> weights{1.0, 1.0, 1.0};
  bool split_cohorts = true;

  static LatencyModel zero() { return {{1.0, 0.0, 0.0}, false}; }
  static LatencyModel fixed(unsigned steps) {
    LatencyModel m{{0.0, 0.0, 0.0}, false};
    m.weights.at(steps) = 1.0;
    return m;
  }

  bool is_zero() const {
    return weights[1] == 0.0 && weights[2] == 0.0 && !split_cohorts;
  }
};

/// Byte accounting of one direction of a connection.
struct FlowStats {
  std::uint64_t written = 0;
  std::uint64_t delivered = 0;
  std::uint64_t read = 0;
  std::uint64_t duplicated = 0;
  std::uint64_t dropped = 0;
  std::uint64_t discarded = 0;  // unread when the reader closed
};

class SimNetwork final : public SocketApi {
 public:
  explicit SimNetwork(std::uint64_t seed, LatencyModel latency = {},
                      std::optional<FaultSpec> fault = std::nullopt)
      : rng_(seed), latency_(latency), fault_(fault) {
    const double total = latency_.weights[0] + latency_.weights[1] + latency_.weights[2];
    for (double w : latency_.weights) {
      if (w < 0.0) throw ConfigError("latency weights must be non-negative");
    }
    if (!(total > 0.0)) throw ConfigError("latency weights must not all be zero");
  }

  // --- simulation control -------------------------------------------------

  std::uint64_t clock() const { return clock_; }

  /// One step of simulated time: bytes whose availability step has come are
  /// delivered.
  void advance() {
    ++clock_;
    deliver_all();
  }

  void tick() override { advance(); }

  /// Availability step of each byte of a write of `byte_count` bytes issued
  /// now. One draw for the latency, one for the cohort split (0 = no split);
  /// the zero-latency model draws nothing.
  std::vector<std::uint64_t> assign_latency(std::size_t byte_count) {
    if (byte_count == 0) throw std::invalid_argument("assign_latency: empty write");
    std::vector<std::uint64_t> at(byte_count, clock_);
    if (latency_.is_zero()) return at;
    const double total = latency_.weights[0] + latency_.weights[1] + latency_.weights[2];
    const double u = rng_.uniform01() * total;
    std::uint64_t latency = 2;
    if (u < latency_.weights[0]) {
      latency = 0;
    } else if (u < latency_.weights[0] + latency_.weights[1]) {
      latency = 1;
    }
    std::size_t split = 0;
    if (latency_.split_cohorts) split = static_cast<std::size_t>(rng_.below(byte_count));
    for (std::size_t i = 0; i < byte_count; ++i) {
      at[i] = clock_ + latency + (split != 0 && i >= split ? 1 : 0);
    }
    return at;
  }

  void inject_fault(FaultSpec fault) {
    if (traffic_seen_) throw std::logic_error("inject_fault: traffic already flowed");
    fault_ = fault;
    fault_fired_at_.reset();
  }

  /// Clock value at which the injected fault fired, if it did.
  std::optional<std::uint64_t> fault_fired_at() const { return fault_fired_at_; }

  /// Accounting of the direction written by `writer`.
  const FlowStats& flow_stats(ConnId writer) const {
    return flows_.at(endpoint(writer).outbound).stats;
  }
  std::size_t in_flight_bytes(ConnId writer) const {
    std::size_t n = 0;
    for (const auto& c : flows_.at(endpoint(writer).outbound).in_flight) n += c.bytes.size();
    return n;
  }
  std::size_t unread_bytes(ConnId reader) const {
    return flows_.at(endpoint(reader).inbound).delivered.size();
  }

  // --- server channels ----------------------------------------------------

  ServerId open_server() override {
    const auto id = next_id_++;
    servers_[id] = ServerRec{};
    return ServerId{id};
  }

  Port bind(ServerId id, Port port) override {
    auto& s = server(id);
    if (s.closed) throw SutError(ErrorKind::ClosedChannel, "bind");
    if (s.bound) throw SutError(ErrorKind::AlreadyBound, "bind");
    if (port == 0) {
      port = next_server_port_;
      while (listening_on(port)) ++port;
      next_server_port_ = static_cast<Port>(port + 1);
    } else if (listening_on(port)) {
      throw SutError(ErrorKind::AddressInUse, "port " + std::to_string(port));
    }
    s.bound = true;
    s.port = port;
    return port;
  }

  Port local_port(ServerId id) override {
    const auto& s = server(id);
    if (s.closed) throw SutError(ErrorKind::ClosedChannel, "getLocalPort");
    if (!s.bound) throw SutError(ErrorKind::NotYetBound, "getLocalPort");
    return s.port;
  }

  std::optional<ConnId> accept(ServerId id) override {
    auto& s = server(id);
    if (s.closed) throw SutError(ErrorKind::ClosedChannel, "accept");
    if (!s.bound) throw SutError(ErrorKind::NotYetBound, "accept");
    if (s.backlog.empty()) {
      if (s.blocking) throw WatchdogExpired("blocking accept with no pending connection");
      return std::nullopt;
    }
    const auto conn = s.backlog.front();
    s.backlog.pop_front();
    return ConnId{conn};
  }

  void close(ServerId id) override {
    auto& s = server(id);
    if (s.closed) return;
    s.closed = true;
    cancel_keys(id.value);
    // Queued connections are aborted: their clients see a reset.
    for (auto pending : s.backlog) close_endpoint(pending, /*abort=*/true);
    s.backlog.clear();
  }

  // --- connection channels ------------------------------------------------

  ConnId connect(Port port) override {
    ServerRec* listener = nullptr;
    for (auto& [id, s] : servers_) {
      if (s.bound && !s.closed && s.port == port) listener = &s;
    }
    if (!listener) throw SutError(ErrorKind::ConnectionRefused, "port " + std::to_string(port));
    const auto client = next_id_++;
    const auto served = next_id_++;
    const std::size_t up = flows_.size();
    flows_.emplace_back();
    flows_.emplace_back();
    EndpointRec c;
    c.local = next_client_port_++;
    c.remote = port;
    c.peer = served;
    c.outbound = up;
    c.inbound = up + 1;
    EndpointRec s;
    s.local = port;
    s.remote = c.local;
    s.peer = client;
    s.outbound = up + 1;
    s.inbound = up;
    endpoints_[client] = c;
    endpoints_[served] = s;
    listener->backlog.push_back(served);
    return ConnId{client};
  }

  ReadResult read(ConnId id, std::size_t capacity) override {
    auto& e = endpoint(id);
    if (e.closed) throw SutError(ErrorKind::ClosedChannel, "read");
    if (e.in_shut) throw SutError(ErrorKind::InputShutdown, "read");
    if (capacity == 0) return {};
    auto& flow = flows_[e.inbound];
    if (flow.delivered.empty() && e.blocking) {
      if (!flow.in_flight.empty()) {
        // Nothing else can run while a blocking read waits: jump ahead.
        clock_ = std::max(clock_, flow.in_flight.front().available_at);
        deliver_all();
      } else if (!e.reset_read_pending && !peer_sent_fin(e)) {
        throw WatchdogExpired("blocking read with nothing in flight");
      }
    }
    if (!flow.delivered.empty()) {
      const std::size_t n = std::min(capacity, flow.delivered.size());
      ReadResult r;
      r.data.assign(flow.delivered.begin(), flow.delivered.begin() + static_cast<std::ptrdiff_t>(n));
      flow.delivered.erase(flow.delivered.begin(), flow.delivered.begin() + static_cast<std::ptrdiff_t>(n));
      flow.stats.read += n;
      return r;
    }
    if (!flow.in_flight.empty()) return {};
    if (e.reset_read_pending) {
      e.reset_read_pending = false;
      throw SutError(ErrorKind::ConnectionReset, "read");
    }
    if (peer_sent_fin(e)) return ReadResult::eos();
    return {};
  }

  std::size_t write(ConnId id, std::span<const std::byte> payload) override {
    auto& e = endpoint(id);
    if (e.closed) throw SutError(ErrorKind::ClosedChannel, "write");
    if (e.out_shut) throw SutError(ErrorKind::OutputShutdown, "write");
    if (e.reset) throw SutError(ErrorKind::ConnectionReset, "write");
    if (payload.empty()) return 0;
    traffic_seen_ = true;
    auto& flow = flows_[e.outbound];
    flow.stats.written += payload.size();
    if (const auto& peer = endpoint_raw(e.peer); peer.closed || (peer.in_shut && peer.out_shut)) {
      // The peer answers data on a closed or fully shut socket with a reset.
      flow.stats.discarded += payload.size();
      e.reset = true;
      return payload.size();
    }
    const auto at = assign_latency(payload.size());
    std::size_t begin = 0;
    while (begin < payload.size()) {
      std::size_t end = begin;
      while (end < payload.size() && at[end] == at[begin]) ++end;
      Cohort cohort{at[begin], {payload.begin() + static_cast<std::ptrdiff_t>(begin),
                                payload.begin() + static_cast<std::ptrdiff_t>(end)}};
      if (fault_armed(FaultKind::DropBytes)) {
        flow.stats.dropped += cohort.bytes.size();
        fire_fault();
      } else {
        flow.in_flight.push_back(std::move(cohort));
      }
      begin = end;
    }
    deliver(flow);
    return payload.size();
  }

  void shutdown_input(ConnId id) override {
    auto& e = endpoint(id);
    if (e.closed) throw SutError(ErrorKind::ClosedChannel, "shutdownInput");
    e.in_shut = true;
  }

  void shutdown_output(ConnId id) override {
    auto& e = endpoint(id);
    if (e.closed) throw SutError(ErrorKind::ClosedChannel, "shutdownOutput");
    e.out_shut = true;
  }

  void close(ConnId id) override {
    endpoint(id);
    close_endpoint(id.value, /*abort=*/false);
  }

  Port local_port(ConnId id) override {
    const auto& e = endpoint(id);
    if (e.closed) throw SutError(ErrorKind::ClosedChannel, "getLocalPort");
    return e.local;
  }

  Port remote_port(ConnId id) override {
    const auto& e = endpoint(id);
    if (e.closed) throw SutError(ErrorKind::ClosedChannel, "getRemotePort");
    return e.remote;
  }

  // --- blocking mode and selectors ----------------------------------------

  void configure_blocking(ChannelRef ch, bool blocking) override {
    bool& flag = blocking_flag(ch);
    if (channel_closed(ch)) throw SutError(ErrorKind::ClosedChannel, "configureBlocking");
    if (blocking && registered(channel_id(ch))) {
      throw SutError(ErrorKind::IllegalBlockingMode, "channel is registered");
    }
    flag = blocking;
  }

  bool is_blocking(ChannelRef ch) override { return blocking_flag(ch); }

  SelectorId open_selector() override {
    const auto id = next_id_++;
    selectors_[id] = SelectorRec{};
    return SelectorId{id};
  }

  SelectorKey register_channel(SelectorId sel_id, ChannelRef ch, InterestSet interest) override {
    auto& sel = selector(sel_id);
    const bool is_server = std::holds_alternative<ServerId>(ch);
    const bool blocking = blocking_flag(ch);
    if (channel_closed(ch)) throw SutError(ErrorKind::ClosedChannel, "register");
    const InterestSet valid = is_server ? kAccept : (kRead | kWrite);
    if (interest == 0 || (interest & ~valid) != 0) {
      throw SutError(ErrorKind::IllegalArgument, "interest set");
    }
    if (blocking) throw SutError(ErrorKind::IllegalBlockingMode, "register");
    if (sel.closed) throw SutError(ErrorKind::ClosedChannel, "selector closed");
    for (auto& [key, reg] : sel.keys) {
      if (reg.channel == channel_id(ch)) {
        reg.interest = interest;
        return SelectorKey{key};
      }
    }
    const auto key = next_id_++;
    sel.keys[key] = Registration{channel_id(ch), is_server, interest};
    return SelectorKey{key};
  }

  void deregister(SelectorId sel_id, SelectorKey key) override {
    selector(sel_id).keys.erase(key.value);
  }

  ReadinessSet select_now(SelectorId sel_id) override {
    auto& sel = selector(sel_id);
    if (sel.closed) throw SutError(ErrorKind::ClosedChannel, "selectNow");
    ReadinessSet out;
    for (const auto& [key, reg] : sel.keys) {
      InterestSet ready = 0;
      if (reg.is_server) {
        const auto& s = servers_.at(reg.channel);
        if (s.bound && !s.backlog.empty()) ready |= kAccept;
      } else {
        const auto& e = endpoints_.at(reg.channel);
        if (!e.in_shut) {
          const auto& flow = flows_[e.inbound];
          const bool readable =
              !flow.delivered.empty() ||
              (flow.in_flight.empty() && (e.reset_read_pending || peer_sent_fin(e)));
          if (readable) {
            ready |= kRead;
          } else if ((reg.interest & kRead) && fault_armed(FaultKind::PhantomReadiness)) {
            ready |= kRead;
            fire_fault();
          }
        }
        if (!e.out_shut) ready |= kWrite;
      }
      ready &= reg.interest;
      if (ready) out.push_back({SelectorKey{key}, ready});
    }
    return out;
  }

  void close(SelectorId sel_id) override {
    auto& sel = selector(sel_id);
    sel.closed = true;
    sel.keys.clear();
  }

  void close_all() override {
    for (auto& [id, s] : servers_) close(ServerId{id});
    for (auto& [id, e] : endpoints_) close_endpoint(id, /*abort=*/false);
    for (auto& [id, sel] : selectors_) close(SelectorId{id});
  }

 private:
  struct Cohort {
    std::uint64_t available_at = 0;
    std::vector<std::byte> bytes;
  };

  struct Flow {
    std::deque<Cohort> in_flight;
    std::deque<std::byte> delivered;
    FlowStats stats;
  };

  struct ServerRec {
    bool bound = false;
    bool closed = false;
    bool blocking = true;
    Port port = 0;
    std::deque<std::uint32_t> backlog;
  };

  struct EndpointRec {
    bool in_shut = false;
    bool out_shut = false;
    bool closed = false;
    bool blocking = true;
    Port local = 0;
    Port remote = 0;
    std::uint32_t peer = 0;
    std::size_t inbound = 0;
    std::size_t outbound = 0;
    bool reset = false;               // peer answered with a reset
    bool reset_read_pending = false;  // a read will report it once
  };

  struct Registration {
    std::uint32_t channel = 0;
    bool is_server = false;
    InterestSet interest = 0;
  };

  struct SelectorRec {
    bool closed = false;
    std::map<std::uint32_t, Registration> keys;
  };

  ServerRec& server(ServerId id) {
    auto it = servers_.find(id.value);
    if (it == servers_.end()) throw std::invalid_argument("unknown server handle");
    return it->second;
  }
  EndpointRec& endpoint(ConnId id) { return endpoint_raw(id.value); }
  const EndpointRec& endpoint(ConnId id) const {
    auto it = endpoints_.find(id.value);
    if (it == endpoints_.end()) throw std::invalid_argument("unknown connection handle");
    return it->second;
  }
  EndpointRec& endpoint_raw(std::uint32_t id) {
    auto it = endpoints_.find(id);
    if (it == endpoints_.end()) throw std::invalid_argument("unknown connection handle");
    return it->second;
  }
  SelectorRec& selector(SelectorId id) {
    auto it = selectors_.find(id.value);
    if (it == selectors_.end()) throw std::invalid_argument("unknown selector handle");
    return it->second;
  }

  static std::uint32_t channel_id(ChannelRef ch) {
    return std::visit([](auto h) { return h.value; }, ch);
  }
  bool& blocking_flag(ChannelRef ch) {
    if (const auto* s = std::get_if<ServerId>(&ch)) return server(*s).blocking;
    return endpoint(std::get<ConnId>(ch)).blocking;
  }
  bool channel_closed(ChannelRef ch) {
    if (const auto* s = std::get_if<ServerId>(&ch)) return server(*s).closed;
    return endpoint(std::get<ConnId>(ch)).closed;
  }

  bool registered(std::uint32_t channel) const {
    for (const auto& [id, sel] : selectors_) {
      for (const auto& [key, reg] : sel.keys) {
        if (reg.channel == channel) return true;
      }
    }
    return false;
  }

  void cancel_keys(std::uint32_t channel) {
    for (auto& [id, sel] : selectors_) {
      std::erase_if(sel.keys, [&](const auto& kv) { return kv.second.channel == channel; });
    }
  }

  bool listening_on(Port port) const {
    for (const auto& [id, s] : servers_) {
      if (s.bound && !s.closed && s.port == port) return true;
    }
    return false;
  }

  bool peer_sent_fin(const EndpointRec& e) const {
    const auto& p = endpoints_.at(e.peer);
    return p.out_shut || p.closed;
  }

  void close_endpoint(std::uint32_t id, bool abort) {
    auto& e = endpoint_raw(id);
    if (e.closed) return;
    auto& in = flows_[e.inbound];
    bool unread = !in.delivered.empty();
    for (const auto& c : in.in_flight) {
      unread = true;
      in.stats.discarded += c.bytes.size();
    }
    in.stats.discarded += in.delivered.size();
    in.in_flight.clear();
    in.delivered.clear();
    const bool fin_sent = e.out_shut;
    e.closed = true;
    cancel_keys(id);
    auto& peer = endpoint_raw(e.peer);
    if (!peer.closed && (abort || unread)) {
      peer.reset = true;
      peer.reset_read_pending = !fin_sent;
    }
  }

  bool fault_armed(FaultKind kind) const {
    return fault_ && fault_->kind == kind && !fault_fired_at_ && clock_ >= fault_->trigger_step;
  }
  void fire_fault() { fault_fired_at_ = clock_; }

  void deliver(Flow& flow) {
    while (!flow.in_flight.empty() && flow.in_flight.front().available_at <= clock_) {
      auto cohort = std::move(flow.in_flight.front());
      flow.in_flight.pop_front();
      flow.delivered.insert(flow.delivered.end(), cohort.bytes.begin(), cohort.bytes.end());
      flow.stats.delivered += cohort.bytes.size();
      if (fault_armed(FaultKind::DuplicateBytes)) {
        flow.delivered.insert(flow.delivered.end(), cohort.bytes.begin(), cohort.bytes.end());
        flow.stats.duplicated += cohort.bytes.size();
        fire_fault();
      }
    }
  }

  void deliver_all() {
    for (auto& flow : flows_) deliver(flow);
  }

  SeededRng rng_;
  LatencyModel latency_;
  std::optional<FaultSpec> fault_;
  std::optional<std::uint64_t> fault_fired_at_;
  bool traffic_seen_ = false;
  std::uint64_t clock_ = 0;
  std::uint32_t next_id_ = 1;
  Port next_server_port_ = 40000;
  Port next_client_port_ = 50000;
  std::map<std::uint32_t, ServerRec> servers_;
  std::map<std::uint32_t, EndpointRec> endpoints_;
  std::map<std::uint32_t, SelectorRec> selectors_;
  std::deque<Flow> flows_;
};

}  // namespace netmbt::sim
