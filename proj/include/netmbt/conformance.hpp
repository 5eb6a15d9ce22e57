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

// Scripted probes that run the same short operation sequence against the
// simulated network (zero latency) and the real loopback backend and compare
// what each observed. Observations are port-agnostic strings such as
// "ok", "err:InputShutdown", "read:10", "eos", "ready:RW" or "blocked".

#include <chrono>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "netmbt/errors.hpp"
#include "netmbt/explorer.hpp"
#include "netmbt/posix_socket.hpp"
#include "netmbt/simnet.hpp"
#include "netmbt/socket_api.hpp"

namespace netmbt::conformance {

class Harness {
 public:
  Harness(SocketApi& api, std::function<void()> settle) : api_(api), settle_(std::move(settle)) {}

  SocketApi& api() { return api_; }
  void settle() { settle_(); }

  ServerId listener() {
    const ServerId s = api_.open_server();
    api_.bind(s, 0);
    return s;
  }

  /// A connected pair (client, accepted), both non-blocking.
  std::pair<ConnId, ConnId> pair() {
    const ServerId s = listener();
    const ConnId c = api_.connect(api_.local_port(s));
    settle();
    const auto served = api_.accept(s);
    if (!served) throw BackendError("accept after connect returned nothing");
    api_.configure_blocking(c, false);
    api_.configure_blocking(*served, false);
    return {c, *served};
  }

  std::string write(ConnId c, std::size_t n) {
    return observe([&] {
      const std::vector<std::byte> payload(n, std::byte{0x5a});
      return "wrote:" + std::to_string(api_.write(c, payload));
    });
  }

  std::string read(ConnId c, std::size_t capacity = 64) {
    return observe([&] {
      const auto r = api_.read(c, capacity);
      return r.end_of_stream ? std::string("eos") : "read:" + std::to_string(r.count());
    });
  }

  std::string ready(SelectorId sel, SelectorKey key) {
    return observe([&] {
      std::string out = "ready:";
      for (const auto& r : api_.select_now(sel)) {
        if (r.key != key) continue;
        if (r.ready & kAccept) out += 'A';
        if (r.ready & kRead) out += 'R';
        if (r.ready & kWrite) out += 'W';
      }
      return out;
    });
  }

  template <typename F>
  static std::string observe(F&& f) {
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
        f();
        return "ok";
      } else {
        return std::string(f());
      }
    } catch (const SutError& e) {
      return "err:" + std::string(to_string(e.kind()));
    } catch (const WatchdogExpired&) {
      return "blocked";
    }
  }

 private:
  SocketApi& api_;
  std::function<void()> settle_;
};

struct Probe {
  std::string state;
  std::string operation;
  std::function<std::string(Harness&)> script;

  std::string name() const { return state + "/" + operation; }
};

inline std::string join(std::initializer_list<std::string> parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

inline std::vector<Probe> probes() {
  using H = Harness;
  std::vector<Probe> ps;
  auto add = [&](std::string state, std::string op, std::function<std::string(H&)> f) {
    ps.push_back({std::move(state), std::move(op), std::move(f)});
  };

  // --- server channel ---
  add("server-unbound", "getLocalPort", [](H& h) {
    const auto s = h.api().open_server();
    return H::observe([&] { h.api().local_port(s); });
  });
  add("server-unbound", "accept", [](H& h) {
    const auto s = h.api().open_server();
    return H::observe([&] { h.api().accept(s); });
  });
  add("server-bound", "bind", [](H& h) {
    const auto s = h.listener();
    return H::observe([&] { h.api().bind(s, 0); });
  });
  add("server-bound", "getLocalPort", [](H& h) {
    const auto s = h.listener();
    return H::observe([&] {
      const Port p = h.api().local_port(s);
      return std::string(p == h.api().local_port(s) && p != 0 ? "stable" : "unstable");
    });
  });
  add("server-bound", "bindSamePortElsewhere", [](H& h) {
    const auto s = h.listener();
    const auto other = h.api().open_server();
    return H::observe([&] { h.api().bind(other, h.api().local_port(s)); });
  });
  add("server-bound", "acceptNonBlockingEmpty", [](H& h) {
    const auto s = h.listener();
    h.api().configure_blocking(s, false);
    return H::observe([&] { return std::string(h.api().accept(s) ? "conn" : "null"); });
  });
  add("server-bound", "acceptBlockingEmpty", [](H& h) {
    const auto s = h.listener();
    return H::observe([&] { h.api().accept(s); });
  });
  add("server-bound", "acceptPending", [](H& h) {
    const auto s = h.listener();
    const auto c = h.api().connect(h.api().local_port(s));
    h.settle();
    return H::observe([&] {
      const auto served = h.api().accept(s);
      if (!served) return std::string("null");
      return std::string(h.api().remote_port(*served) == h.api().local_port(c) ? "conn:paired"
                                                                             : "conn:unpaired");
    });
  });
  add("server-bound", "acceptFifo", [](H& h) {
    const auto s = h.listener();
    const auto c1 = h.api().connect(h.api().local_port(s));
    const auto c2 = h.api().connect(h.api().local_port(s));
    h.settle();
    const auto a1 = h.api().accept(s);
    const auto a2 = h.api().accept(s);
    const bool fifo = a1 && a2 && h.api().remote_port(*a1) == h.api().local_port(c1) &&
                      h.api().remote_port(*a2) == h.api().local_port(c2);
    return std::string(fifo ? "fifo" : "not-fifo");
  });
  add("server-bound", "connectAfterClose", [](H& h) {
    const auto s = h.listener();
    const Port p = h.api().local_port(s);
    h.api().close(s);
    return H::observe([&] { h.api().connect(p); });
  });
  add("server-registered", "configureBlocking", [](H& h) {
    const auto s = h.listener();
    h.api().configure_blocking(s, false);
    const auto sel = h.api().open_selector();
    h.api().register_channel(sel, s, kAccept);
    return join({H::observe([&] { h.api().configure_blocking(s, true); }),
                 H::observe([&] { h.api().configure_blocking(s, false); })});
  });
  add("server-blocking", "register", [](H& h) {
    const auto s = h.listener();
    const auto sel = h.api().open_selector();
    return H::observe([&] { h.api().register_channel(sel, s, kAccept); });
  });
  add("server-bound", "registerReadInterest", [](H& h) {
    const auto s = h.listener();
    h.api().configure_blocking(s, false);
    const auto sel = h.api().open_selector();
    return H::observe([&] { h.api().register_channel(sel, s, kRead); });
  });
  add("server-registered", "selectAccept", [](H& h) {
    const auto s = h.listener();
    h.api().configure_blocking(s, false);
    const auto sel = h.api().open_selector();
    const auto key = h.api().register_channel(sel, s, kAccept);
    const std::string before = h.ready(sel, key);
    h.api().connect(h.api().local_port(s));
    h.settle();
    const std::string pending = h.ready(sel, key);
    h.api().accept(s);
    return join({before, pending, h.ready(sel, key)});
  });
  add("server-closed", "bind", [](H& h) {
    const auto s = h.listener();
    h.api().close(s);
    return H::observe([&] { h.api().bind(s, 0); });
  });
  add("server-closed", "accept", [](H& h) {
    const auto s = h.listener();
    h.api().close(s);
    return H::observe([&] { h.api().accept(s); });
  });
  add("server-closed", "configureBlocking", [](H& h) {
    const auto s = h.listener();
    h.api().close(s);
    return H::observe([&] { h.api().configure_blocking(s, false); });
  });
  add("server-closed", "getLocalPort", [](H& h) {
    const auto s = h.listener();
    h.api().close(s);
    return H::observe([&] { h.api().local_port(s); });
  });
  add("server-closed", "close", [](H& h) {
    const auto s = h.listener();
    h.api().close(s);
    return H::observe([&] { h.api().close(s); });
  });
  add("server-closed", "pendingClientRead", [](H& h) {
    const auto s = h.listener();
    const auto c = h.api().connect(h.api().local_port(s));
    h.api().configure_blocking(c, false);
    h.settle();
    h.api().close(s);
    h.settle();
    return join({h.read(c), h.read(c), h.write(c, 4)});
  });

  // --- connection channel ---
  add("conn-connected", "readEmpty", [](H& h) {
    auto [c, a] = h.pair();
    return h.read(a);
  });
  add("conn-connected", "writeRead", [](H& h) {
    auto [c, a] = h.pair();
    const std::string w = h.write(c, 10);
    h.settle();
    return join({w, h.read(a, 64), h.read(a, 64)});
  });
  add("conn-connected", "partialRead", [](H& h) {
    auto [c, a] = h.pair();
    h.write(a, 10);
    h.settle();
    return join({h.read(c, 4), h.read(c, 4), h.read(c, 4), h.read(c, 4)});
  });
  add("conn-connected", "blockingReadEmpty", [](H& h) {
    auto [c, a] = h.pair();
    h.api().configure_blocking(a, true);
    return h.read(a);
  });
  add("conn-connected", "blockingReadData", [](H& h) {
    auto [c, a] = h.pair();
    h.write(c, 7);
    h.api().configure_blocking(a, true);
    return h.read(a);
  });
  add("conn-connected", "ports", [](H& h) {
    auto [c, a] = h.pair();
    const bool ok = h.api().local_port(c) == h.api().remote_port(a) &&
                    h.api().remote_port(c) == h.api().local_port(a);
    return std::string(ok ? "mirrored" : "not-mirrored");
  });
  add("conn-connected", "isBlocking", [](H& h) {
    auto [c, a] = h.pair();
    const bool before = h.api().is_blocking(c);
    h.api().configure_blocking(c, true);
    return std::string(before ? "blocking" : "non-blocking") + " " +
           (h.api().is_blocking(c) ? "blocking" : "non-blocking");
  });
  add("conn-input-shut", "read", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_input(a);
    return h.read(a);
  });
  add("conn-input-shut", "write", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_input(a);
    const std::string w = h.write(a, 5);
    h.settle();
    return join({w, h.read(c)});
  });
  add("conn-input-shut", "peerWrite", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_input(a);
    const std::string w = h.write(c, 5);
    h.settle();
    return join({w, h.write(c, 5)});
  });
  add("conn-input-shut", "shutdownInput", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_input(a);
    return H::observe([&] { h.api().shutdown_input(a); });
  });
  add("conn-output-shut", "write", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_output(a);
    return h.write(a, 5);
  });
  add("conn-output-shut", "peerRead", [](H& h) {
    auto [c, a] = h.pair();
    h.write(a, 5);
    h.api().shutdown_output(a);
    h.settle();
    return join({h.read(c), h.read(c), h.write(c, 3)});
  });
  add("conn-output-shut", "shutdownOutput", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_output(a);
    return H::observe([&] { h.api().shutdown_output(a); });
  });
  add("conn-output-shut", "read", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_output(a);
    h.write(c, 6);
    h.settle();
    return h.read(a);
  });
  add("conn-shut", "peerWrite", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_input(a);
    h.api().shutdown_output(a);
    h.settle();
    const std::string w1 = h.write(c, 5);
    h.settle();
    return join({w1, h.read(c), h.write(c, 5), h.read(c)});
  });
  add("conn-closed", "read", [](H& h) {
    auto [c, a] = h.pair();
    h.api().close(a);
    return h.read(a);
  });
  add("conn-closed", "write", [](H& h) {
    auto [c, a] = h.pair();
    h.api().close(a);
    return h.write(a, 1);
  });
  add("conn-closed", "shutdownOutput", [](H& h) {
    auto [c, a] = h.pair();
    h.api().close(a);
    return H::observe([&] { h.api().shutdown_output(a); });
  });
  add("conn-closed", "getRemotePort", [](H& h) {
    auto [c, a] = h.pair();
    h.api().close(a);
    return H::observe([&] { h.api().remote_port(a); });
  });
  add("conn-closed", "close", [](H& h) {
    auto [c, a] = h.pair();
    h.api().close(a);
    return H::observe([&] { h.api().close(a); });
  });
  add("conn-peer-closed", "readWrite", [](H& h) {
    auto [c, a] = h.pair();
    h.write(a, 8);
    h.api().close(a);
    h.settle();
    const std::string r = join({h.read(c), h.read(c)});
    const std::string w1 = h.write(c, 4);
    h.settle();
    return join({r, w1, h.write(c, 4), h.read(c)});
  });
  add("conn-peer-aborted", "read", [](H& h) {
    auto [c, a] = h.pair();
    h.write(c, 8);
    h.settle();
    h.api().close(a);  // unread inbound data: the close is an abort
    h.settle();
    return join({h.read(c), h.read(c), h.write(c, 4)});
  });
  add("conn-peer-aborted", "readPendingData", [](H& h) {
    auto [c, a] = h.pair();
    h.write(a, 6);
    h.write(c, 8);
    h.settle();
    h.api().close(a);
    h.settle();
    return join({h.read(c), h.read(c), h.read(c)});
  });
  add("conn-peer-half-closed-aborted", "read", [](H& h) {
    auto [c, a] = h.pair();
    h.api().shutdown_output(a);
    h.write(c, 8);
    h.settle();
    h.api().close(a);
    h.settle();
    return join({h.read(c), h.read(c), h.write(c, 2)});
  });

  // --- selectors ---
  add("conn-registered", "selectReadWrite", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    const auto key = h.api().register_channel(sel, a, kRead | kWrite);
    const std::string idle = h.ready(sel, key);
    h.write(c, 3);
    h.settle();
    const std::string data = h.ready(sel, key);
    h.read(a);
    return join({idle, data, h.ready(sel, key)});
  });
  add("conn-registered", "selectAfterShutdowns", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    const auto key = h.api().register_channel(sel, a, kRead | kWrite);
    h.write(c, 3);
    h.settle();
    h.api().shutdown_output(a);
    const std::string out_shut = h.ready(sel, key);
    h.api().shutdown_input(a);
    return join({out_shut, h.ready(sel, key)});
  });
  add("conn-registered", "selectPeerClosed", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    const auto key = h.api().register_channel(sel, a, kRead);
    h.api().close(c);
    h.settle();
    return join({h.ready(sel, key), h.read(a)});
  });
  add("conn-registered", "configureBlocking", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    h.api().register_channel(sel, a, kRead);
    return H::observe([&] { h.api().configure_blocking(a, true); });
  });
  add("conn-registered", "closeCancelsKey", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    const auto key = h.api().register_channel(sel, a, kWrite);
    h.api().close(a);
    return h.ready(sel, key);
  });
  add("conn-registered", "deregister", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    const auto key = h.api().register_channel(sel, a, kWrite);
    h.api().deregister(sel, key);
    return join({h.ready(sel, key), H::observe([&] { h.api().configure_blocking(a, true); })});
  });
  add("conn-connected", "registerAcceptInterest", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    return H::observe([&] { h.api().register_channel(sel, a, kAccept); });
  });
  add("conn-closed", "register", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    h.api().close(a);
    return H::observe([&] { h.api().register_channel(sel, a, kRead); });
  });
  add("selector-closed", "register", [](H& h) {
    auto [c, a] = h.pair();
    const auto sel = h.api().open_selector();
    h.api().close(sel);
    return H::observe([&] { h.api().register_channel(sel, a, kRead); });
  });
  add("selector-closed", "select", [](H& h) {
    const auto sel = h.api().open_selector();
    h.api().close(sel);
    return H::observe([&] { h.api().select_now(sel); });
  });
  return ps;
}

struct ProbeResult {
  std::string name;
  std::string sim;
  std::string real;

  bool diverged() const { return sim != real; }
};

struct Report {
  std::vector<ProbeResult> results;

  std::size_t divergences() const {
    std::size_t n = 0;
    for (const auto& r : results) n += r.diverged();
    return n;
  }

  /// Error kinds raised on both backends somewhere in the suite.
  std::set<ErrorKind> kinds_observed() const {
    std::set<ErrorKind> kinds;
    for (const auto& r : results) {
      for (auto k : kAllErrorKinds) {
        const std::string tag = "err:" + std::string(to_string(k));
        if (r.sim.find(tag) != std::string::npos && r.real.find(tag) != std::string::npos) {
          kinds.insert(k);
        }
      }
    }
    return kinds;
  }
};

inline std::string run_on_sim(const Probe& p) {
  sim::SimNetwork net(0x5eed, sim::LatencyModel::zero());
  Harness h(net, [&net] { net.tick(); });
  return Harness::observe([&] { return p.script(h); });
}

/// `settle` is how long real traffic gets to cross loopback between steps.
inline std::string run_on_real(const Probe& p,
                               std::chrono::milliseconds settle = std::chrono::milliseconds(5),
                               std::chrono::milliseconds block_bound = std::chrono::milliseconds(200)) {
  Watchdog watchdog(block_bound);
  PosixSocketApi api(&watchdog);
  Harness h(api, [settle] { std::this_thread::sleep_for(settle); });
  return Harness::observe([&] { return p.script(h); });
}

inline Report run_all() {
  Report report;
  for (const auto& p : probes()) report.results.push_back({p.name(), run_on_sim(p), run_on_real(p)});
  return report;
}

}  // namespace netmbt::conformance
