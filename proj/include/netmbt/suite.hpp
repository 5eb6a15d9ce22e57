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

// Suite plumbing shared by the command-line tool and the tests: turns a flat
// configuration into an explorer over NetEnv for either backend, records the
// configuration in every trace and rebuilds it for replay.

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>

#include "netmbt/errors.hpp"
#include "netmbt/explorer.hpp"
#include "netmbt/models.hpp"
#include "netmbt/portman.hpp"
#include "netmbt/posix_socket.hpp"
#include "netmbt/rng.hpp"
#include "netmbt/simnet.hpp"
#include "netmbt/trace.hpp"

namespace netmbt {

enum class Backend { Sim, Real };

inline const char* to_string(Backend b) { return b == Backend::Sim ? "sim" : "real"; }

inline Backend parse_backend(const std::string& s) {
  if (s == "sim") return Backend::Sim;
  if (s == "real") return Backend::Real;
  throw ConfigError("unknown backend '" + s + "' (expected sim or real)");
}

inline sim::FaultKind parse_fault(const std::string& s) {
  for (auto k : {sim::FaultKind::DuplicateBytes, sim::FaultKind::DropBytes,
                 sim::FaultKind::PhantomReadiness}) {
    if (sim::to_string(k) == s) return k;
  }
  throw ConfigError("unknown fault '" + s + "'");
}

/// Accepts a decimal ("0.25") or a ratio of integers ("1/4").
inline double parse_probability(const std::string& s) {
  auto parse_double = [&](std::string_view text) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) {
      throw ConfigError("not a number: '" + s + "'");
    }
    return v;
  };
  double p = 0.0;
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const double num = parse_double(std::string_view(s).substr(0, slash));
    const double den = parse_double(std::string_view(s).substr(slash + 1));
    if (den == 0.0) throw ConfigError("zero denominator in '" + s + "'");
    p = num / den;
  } else {
    p = parse_double(s);
  }
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probability '" + s + "' outside [0, 1]");
  return p;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline PortRange parse_port_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("port range must be lo:hi, got '" + s + "'");
  auto parse_port = [&](std::string_view text) {
    unsigned v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size() || v == 0 || v > 65535) {
      throw ConfigError("bad port in range '" + s + "'");
    }
    return static_cast<Port>(v);
  };
  PortRange r{parse_port(std::string_view(s).substr(0, colon)),
              parse_port(std::string_view(s).substr(colon + 1))};
  if (r.lo > r.hi) throw ConfigError("port range '" + s + "' is empty");
  return r;
}

struct SuiteConfig {
  std::string model = "server-main";
  Backend backend = Backend::Sim;
  std::uint64_t seed = 0;
  std::size_t tests = 100;
  std::size_t max_steps = 100;
  bool abort_on_failure = false;
  PortRange ports;
  std::size_t port_cooldown = 2;
  bool zero_latency = false;
  std::optional<sim::FaultKind> fault;
  std::uint64_t fault_trigger = 0;
  ModelParams params;
  std::chrono::milliseconds watchdog{5000};

  void validate() const {
    const auto& reg = model_registry();
    const auto it = reg.find(model);
    if (it == reg.end()) throw ConfigError("unknown model '" + model + "'");
    if (!it->second.runnable) {
      throw ConfigError("model '" + model + "' is launched by a server model and cannot be run on its own");
    }
    if (tests < 1) throw ConfigError("--tests must be at least 1");
    if (max_steps < 1) throw ConfigError("--max-steps must be at least 1");
    if (fault && backend == Backend::Real) throw ConfigError("faults can only be injected into the sim backend");
    if (!(params.p_close >= 0.0 && params.p_close <= 1.0)) throw ConfigError("p-close outside [0, 1]");
    if (watchdog.count() <= 0) throw ConfigError("watchdog bound must be positive");
    if (ports.size() == 0) throw ConfigError("port range is empty");
  }

  NetSpec root() const {
    validate();
    return model_registry().at(model).factory();
  }

  /// Everything replay needs beyond the seed, in trace metadata form.
  std::vector<std::pair<std::string, std::string>> meta() const {
    return {
        {"model", model},
        {"max-steps", std::to_string(max_steps)},
        {"latency", zero_latency ? "zero" : "default"},
        {"fault", fault ? std::string(sim::to_string(*fault)) : "none"},
        {"fault-step", std::to_string(fault_trigger)},
        {"p-close", format_double(params.p_close)},
        {"max-connections", std::to_string(params.max_connections)},
    };
  }
};

/// The network seed of a sim test, kept apart from the scheduling stream.
constexpr std::uint64_t sim_network_seed(std::uint64_t test_seed) {
  return splitmix64(test_seed ^ 0x5D588B656C078965ULL);
}

namespace detail {

/// True when nothing else on the host holds `port` on loopback.
inline bool port_is_bindable(Port port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return false;
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  const bool ok = ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0;
  ::close(fd);
  return ok;
}

}  // namespace detail

/// Builds per-test environments for a configuration. Holds the port pool of
/// the real backend across tests.
class NetEnvFactory {
 public:
  explicit NetEnvFactory(const SuiteConfig& config)
      : config_(config), pool_(std::make_shared<PortPool>(config.ports, config.port_cooldown)) {}

  std::unique_ptr<NetEnv> operator()(const TestSetup& setup) {
    if (config_.backend == Backend::Sim) {
      auto net = std::make_unique<sim::SimNetwork>(
          sim_network_seed(setup.seed),
          config_.zero_latency ? sim::LatencyModel::zero() : sim::LatencyModel{},
          config_.fault ? std::optional(sim::FaultSpec{*config_.fault, config_.fault_trigger})
                        : std::nullopt);
      return std::make_unique<NetEnv>(std::move(net), config_.params);
    }
    const Port port = lease_bindable_port();
    auto pool = pool_;
    return std::make_unique<NetEnv>(std::make_unique<PosixSocketApi>(setup.watchdog),
                                    config_.params, port, [pool, port](NetEnv&) {
                                      pool->release(port);
                                      pool->next_test();
                                    });
  }

  const PortPool& pool() const { return *pool_; }

 private:
  // A port held by some other process stays leased for the rest of the
  // suite; the pool then moves on to the next one.
  Port lease_bindable_port() {
    for (;;) {
      const Port p = pool_->acquire();
      if (detail::port_is_bindable(p)) return p;
    }
  }

  SuiteConfig config_;
  std::shared_ptr<PortPool> pool_;
};

inline Explorer<NetEnv> make_explorer(const SuiteConfig& config) {
  config.validate();
  RunConfig rc;
  rc.seed = config.seed;
  rc.num_tests = config.tests;
  rc.max_steps = config.max_steps;
  rc.abort_on_first_failure = config.abort_on_failure;
  rc.watchdog = config.watchdog;
  rc.backend_label = to_string(config.backend);
  rc.meta = config.meta();
  return Explorer<NetEnv>(std::move(rc), NetEnvFactory(config));
}

inline SuiteReport run_net_suite(const SuiteConfig& config, std::ostream* trace_out = nullptr) {
  auto explorer = make_explorer(config);
  return explorer.run_suite(config.root(), trace_out);
}

/// Rebuilds the configuration a trace was recorded with. `base` supplies
/// what traces do not record (port range, watchdog).
inline SuiteConfig config_from_trace(const Trace& trace, SuiteConfig base = {}) {
  auto need = [&](const std::string& key) {
    const auto v = trace.meta_value(key);
    if (!v) throw ConfigError("trace has no '" + key + "' metadata");
    return *v;
  };
  auto to_size = [&](const std::string& key) {
    const std::string s = need(key);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw ConfigError("bad '" + key + "' metadata: " + s);
    }
    return v;
  };
  base.model = need("model");
  base.backend = parse_backend(trace.backend);
  base.seed = 0;
  base.tests = 1;
  base.max_steps = to_size("max-steps");
  const std::string latency = need("latency");
  if (latency != "zero" && latency != "default") throw ConfigError("bad latency metadata: " + latency);
  base.zero_latency = latency == "zero";
  const std::string fault = need("fault");
  base.fault = fault == "none" ? std::nullopt : std::optional(parse_fault(fault));
  base.fault_trigger = to_size("fault-step");
  base.params.p_close = parse_probability(need("p-close"));
  base.params.max_connections = static_cast<std::int64_t>(to_size("max-connections"));
  base.validate();
  return base;
}

/// Re-executes a recorded test; throws DivergenceError on mismatch.
inline Trace replay_net(const Trace& recorded, SuiteConfig base = {}) {
  const SuiteConfig config = config_from_trace(recorded, std::move(base));
  auto explorer = make_explorer(config);
  return explorer.replay(recorded, config.root());
}

}  // namespace netmbt
