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

// Test models for the socket API: a minimalist blocking server, a detailed
// selector-based server main model, the server-side worker handling one
// connection and the client that drives it. Every connection is checked
// against the oracle ledger from both ends.
//
// Exception transitions ("red" edges) follow the legality table in
// socket_api.hpp: an operation listed there as illegal in a state appears as
// a transition that must raise the listed error and returns to the same
// state.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "netmbt/efsm.hpp"
#include "netmbt/ledger.hpp"
#include "netmbt/socket_api.hpp"

namespace netmbt {

struct ModelParams {
  double p_close = 0.1;          // client's chance to close when it considers it
  std::int64_t max_connections = 3;  // per server instance and test
  std::size_t max_payload = 64;
};

/// Everything a model action can reach during one test.
class NetEnv {
 public:
  NetEnv(std::unique_ptr<SocketApi> api, ModelParams params, Port listen_port = 0,
         std::function<void(NetEnv&)> on_teardown = {})
      : api_(std::move(api)),
        params_(params),
        listen_port_(listen_port),
        on_teardown_(std::move(on_teardown)) {}

  SocketApi& api() { return *api_; }
  OracleLedger& ledger() { return ledger_; }
  const ModelParams& params() const { return params_; }
  Port listen_port() const { return listen_port_; }

  void after_step() { api_->tick(); }

  /// Force-closes every channel of the test and clears the ledger.
  void teardown() {
    if (on_teardown_) on_teardown_(*this);
    api_->close_all();
    ledger_.reset();
  }

 private:
  std::unique_ptr<SocketApi> api_;
  OracleLedger ledger_;
  ModelParams params_;
  Port listen_port_;
  std::function<void(NetEnv&)> on_teardown_;
};

using NetSpec = efsm::SpecPtr<NetEnv>;

namespace models {

using T = efsm::Transition<NetEnv>;
using Ctx = efsm::ActionContext<NetEnv>;
using efsm::Vars;

inline std::vector<std::byte> random_payload(Ctx& ctx) {
  std::vector<std::byte> out(ctx.rng().between(1, ctx.env().params().max_payload));
  for (auto& b : out) b = static_cast<std::byte>(ctx.rng().below(256));
  return out;
}

inline ConnId conn_of(Ctx& ctx) { return ctx.vars().get<ConnId>("conn"); }

inline std::size_t ledger_id(Ctx& ctx) {
  return static_cast<std::size_t>(ctx.vars().get<std::int64_t>("ledger"));
}

/// Runs a connection operation; a reset it raises must be justified by the
/// ledger before it is mapped to the model's reset state.
template <typename Op>
auto reset_checked(Ctx& ctx, Side side, Op&& op) {
  try {
    return op();
  } catch (const SutError& e) {
    if (e.kind() == ErrorKind::ConnectionReset) {
      ctx.env().ledger().check_reset(ledger_id(ctx), side, ctx.instance_id());
    }
    throw;
  }
}

inline ReadResult checked_read(Ctx& ctx, Side side, std::size_t capacity) {
  auto& api = ctx.env().api();
  const ConnId conn = conn_of(ctx);
  ReadResult r = reset_checked(ctx, side, [&] { return api.read(conn, capacity); });
  ctx.env().ledger().check_read(ledger_id(ctx), side, ctx.instance_id(), r);
  return r;
}

inline void checked_write(Ctx& ctx, Side side) {
  auto& api = ctx.env().api();
  const ConnId conn = conn_of(ctx);
  const auto payload = random_payload(ctx);
  const std::size_t n = reset_checked(ctx, side, [&] { return api.write(conn, payload); });
  require(n <= payload.size(), "write reported more bytes than offered");
  ctx.env().ledger().record_write(ledger_id(ctx), side, ctx.instance_id(), n);
}

inline std::size_t read_capacity(Ctx& ctx) {
  return ctx.rng().between(1, ctx.env().params().max_payload);
}

inline bool probes_left(const Vars& v) { return v.get_or<std::int64_t>("probes", 0) < 2; }

inline efsm::Action<NetEnv> probe(std::function<void(Ctx&)> op) {
  return [op = std::move(op)](Ctx& ctx) {
    ctx.vars().increment("probes");
    op(ctx);
  };
}

// --- client ---------------------------------------------------------------

inline NetSpec build_client() {
  auto ctor = [](Ctx& ctx) {
    auto& api = ctx.env().api();
    const auto port = static_cast<Port>(ctx.vars().get<std::int64_t>("port"));
    const ConnId conn = api.connect(port);
    api.configure_blocking(conn, false);
    const auto id = ctx.env().ledger().open(api.local_port(conn), port, ctx.instance_id());
    ctx.vars().set("conn", conn);
    ctx.vars().set("ledger", static_cast<std::int64_t>(id));
  };
  auto close = [](Ctx& ctx) {
    ctx.env().api().close(conn_of(ctx));
    ctx.env().ledger().closed(ledger_id(ctx), Side::Client, ctx.instance_id());
  };
  std::vector<T> ts;
  ts.push_back(T::self("open", "read", [](Ctx& ctx) {
                 const auto r = checked_read(ctx, Side::Client, read_capacity(ctx));
                 ctx.emit(r.end_of_stream ? "eof" : "data");
               })
                   .branch("data", "open")
                   .branch("eof", "eof")
                   .on_error(ErrorKind::ConnectionReset, "reset"));
  ts.push_back(T::self("open", "write", [](Ctx& ctx) { checked_write(ctx, Side::Client); })
                   .with_weight(0.5)
                   .on_error(ErrorKind::ConnectionReset, "reset"));
  ts.push_back(T::self("open", "maybeClose", [close](Ctx& ctx) {
                 if (maybe(ctx.rng(), ctx.env().params().p_close)) {
                   close(ctx);
                   ctx.emit("closed");
                 } else {
                   ctx.emit("stay");
                 }
               })
                   .branch("closed", "closed")
                   .branch("stay", "open"));
  ts.push_back(T::edge("eof", "closed", "close", close));
  ts.push_back(T::edge("reset", "closed", "close", close));
  return efsm::define_model<NetEnv>("client", "open", {"open", "eof", "reset", "closed"},
                                    std::move(ts), ctor);
}

// --- worker ---------------------------------------------------------------

inline NetSpec build_worker() {
  auto ctor = [](Ctx& ctx) {
    auto& api = ctx.env().api();
    const ConnId conn = conn_of(ctx);
    const auto id = ctx.env().ledger().attach_server(api.remote_port(conn), ctx.instance_id());
    api.configure_blocking(conn, false);
    const SelectorId sel = api.open_selector();
    const SelectorKey key = api.register_channel(sel, conn, kRead | kWrite);
    ctx.vars().set("ledger", static_cast<std::int64_t>(id));
    ctx.vars().set("selector", sel);
    ctx.vars().set("key", key);
  };

  auto read = [](Ctx& ctx) { checked_read(ctx, Side::Server, read_capacity(ctx)); };
  auto write = [](Ctx& ctx) { checked_write(ctx, Side::Server); };
  auto read_refused = [](Ctx& ctx) { ctx.env().api().read(conn_of(ctx), read_capacity(ctx)); };
  auto write_refused = [](Ctx& ctx) {
    const auto payload = random_payload(ctx);
    ctx.env().api().write(conn_of(ctx), payload);
  };
  auto check_selector = [](Ctx& ctx) {
    auto& api = ctx.env().api();
    const auto ready = api.select_now(ctx.vars().get<SelectorId>("selector"));
    const auto key = ctx.vars().get<SelectorKey>("key");
    const bool in_shut = ctx.state() == "inShut" || ctx.state() == "shut";
    const bool out_shut = ctx.state() == "outShut" || ctx.state() == "shut";
    if (contains_ready(ready, key, kWrite)) {
      require(!out_shut, "selector reported WRITE after shutdownOutput");
    }
    if (contains_ready(ready, key, kRead)) {
      require(!in_shut, "selector reported READ after shutdownInput");
      ctx.env().ledger().check_read_ready(ledger_id(ctx), Side::Server, ctx.instance_id());
      const auto r = checked_read(ctx, Side::Server, ctx.env().params().max_payload);
      require(r.end_of_stream || r.count() > 0,
              "selector reported READ but the following read returned no data");
    }
  };
  auto shut_in = [](Ctx& ctx) {
    ctx.env().api().shutdown_input(conn_of(ctx));
    ctx.env().ledger().input_shut(ledger_id(ctx), Side::Server, ctx.instance_id());
  };
  auto shut_out = [](Ctx& ctx) {
    ctx.env().api().shutdown_output(conn_of(ctx));
    ctx.env().ledger().output_shut(ledger_id(ctx), Side::Server, ctx.instance_id());
  };
  auto close = [](Ctx& ctx) {
    auto& api = ctx.env().api();
    api.close(conn_of(ctx));
    api.close(ctx.vars().get<SelectorId>("selector"));
    ctx.env().ledger().closed(ledger_id(ctx), Side::Server, ctx.instance_id());
  };
  constexpr auto kReset = ErrorKind::ConnectionReset;

  std::vector<T> ts;
  // connected
  ts.push_back(T::self("connected", "read", read).on_error(kReset, "reset"));
  ts.push_back(T::self("connected", "write", write).on_error(kReset, "reset"));
  ts.push_back(T::self("connected", "checkSelector", check_selector).on_error(kReset, "reset"));
  ts.push_back(T::edge("connected", "inShut", "shutdownInput", shut_in).with_weight(0.5));
  ts.push_back(T::edge("connected", "outShut", "shutdownOutput", shut_out).with_weight(0.5));
  ts.push_back(T::edge("connected", "closed", "close", close).with_weight(0.5));
  // input shut
  ts.push_back(T::self("inShut", "read", read_refused).expect_error(ErrorKind::InputShutdown, "inShut"));
  ts.push_back(T::self("inShut", "write", write).on_error(kReset, "reset"));
  ts.push_back(T::self("inShut", "checkSelector", check_selector));
  ts.push_back(T::edge("inShut", "shut", "shutdownOutput", shut_out).with_weight(0.5));
  ts.push_back(T::edge("inShut", "closed", "close", close).with_weight(0.5));
  // output shut
  ts.push_back(T::self("outShut", "read", read).on_error(kReset, "reset"));
  ts.push_back(T::self("outShut", "write", write_refused).expect_error(ErrorKind::OutputShutdown, "outShut"));
  ts.push_back(T::self("outShut", "checkSelector", check_selector).on_error(kReset, "reset"));
  ts.push_back(T::edge("outShut", "shut", "shutdownInput", shut_in).with_weight(0.5));
  ts.push_back(T::edge("outShut", "closed", "close", close).with_weight(0.5));
  // both halves shut, channel still open
  ts.push_back(T::self("shut", "read", read_refused).expect_error(ErrorKind::InputShutdown, "shut"));
  ts.push_back(T::self("shut", "write", write_refused).expect_error(ErrorKind::OutputShutdown, "shut"));
  ts.push_back(T::self("shut", "checkSelector", check_selector));
  ts.push_back(T::edge("shut", "closed", "close", close));
  // peer reset observed
  ts.push_back(T::edge("reset", "closed", "close", close));
  // closed: a couple of probes that must be refused, then the instance ends
  ts.push_back(T::self("closed", "read", probe(read_refused))
                   .when(probes_left)
                   .expect_error(ErrorKind::ClosedChannel, "closed"));
  ts.push_back(T::self("closed", "write", probe(write_refused))
                   .when(probes_left)
                   .expect_error(ErrorKind::ClosedChannel, "closed"));
  return efsm::define_model<NetEnv>("worker", "connected",
                                    {"connected", "inShut", "outShut", "shut", "reset", "closed"},
                                    std::move(ts), ctor);
}

// --- server main (selector based) -----------------------------------------

inline NetSpec worker_model();
inline NetSpec client_model();

inline void open_and_bind(Ctx& ctx) {
  auto& api = ctx.env().api();
  const ServerId server = api.open_server();
  const Port port = api.bind(server, ctx.env().listen_port());
  ctx.vars().set("server", server);
  ctx.vars().set("port", static_cast<std::int64_t>(port));
  ctx.vars().set("maxConnections", ctx.env().params().max_connections);
}

inline ServerId server_of(Ctx& ctx) { return ctx.vars().get<ServerId>("server"); }
inline Port port_of(Ctx& ctx) { return static_cast<Port>(ctx.vars().get<std::int64_t>("port")); }

inline void launch_client(Ctx& ctx) {
  ctx.launch(client_model(), Vars{{"port", static_cast<std::int64_t>(port_of(ctx))}});
}

inline void close_listener(Ctx& ctx) {
  ctx.env().api().close(server_of(ctx));
  ctx.env().ledger().listener_closed(port_of(ctx));
}

inline NetSpec build_server_main() {
  auto ctor = [](Ctx& ctx) {
    open_and_bind(ctx);
    ctx.vars().set("blocking", true);
  };
  auto toggle = [](Ctx& ctx) {
    const bool next = !ctx.vars().get<bool>("blocking");
    ctx.env().api().configure_blocking(server_of(ctx), next);
    ctx.vars().set("blocking", next);
  };
  auto local_port = [](Ctx& ctx) {
    const Port p = ctx.env().api().local_port(server_of(ctx));
    require(p == port_of(ctx), "getLocalPort returned " + std::to_string(p) + ", bound to " +
                                   std::to_string(port_of(ctx)));
  };
  auto rebind = [](Ctx& ctx) { ctx.env().api().bind(server_of(ctx), 0); };
  auto configure_selector = [](Ctx& ctx) {
    auto& api = ctx.env().api();
    api.configure_blocking(server_of(ctx), false);
    ctx.vars().set("blocking", false);
    const SelectorId sel = api.open_selector();
    ctx.vars().set("selector", sel);
    ctx.vars().set("key", api.register_channel(sel, server_of(ctx), kAccept));
  };
  auto check_selector = [](Ctx& ctx) {
    const auto ready = ctx.env().api().select_now(ctx.vars().get<SelectorId>("selector"));
    if (contains_ready(ready, ctx.vars().get<SelectorKey>("key"), kAccept)) {
      require(ctx.vars().get_or<std::int64_t>("clients", 0) >
                  ctx.vars().get_or<std::int64_t>("accepted", 0),
              "selector reported ACCEPT with no pending client");
    }
  };
  auto accept = [](Ctx& ctx) {
    const auto conn = ctx.env().api().accept(server_of(ctx));
    if (!conn) {
      ctx.emit("nullResult");
      return;
    }
    require(ctx.vars().get_or<std::int64_t>("accepted", 0) <
                ctx.vars().get_or<std::int64_t>("clients", 0),
            "accept returned a connection no client initiated");
    ctx.vars().increment("accepted");
    ctx.launch(worker_model(), Vars{{"conn", *conn}});
    ctx.emit("connected");
  };
  auto close = [](Ctx& ctx) {
    close_listener(ctx);
    if (ctx.vars().contains("selector")) ctx.env().api().close(ctx.vars().get<SelectorId>("selector"));
  };
  auto can_launch = [](const Vars& v) {
    return v.get_or<std::int64_t>("clients", 0) < v.get<std::int64_t>("maxConnections");
  };
  auto launch = [](Ctx& ctx) {
    ctx.vars().increment("clients");
    launch_client(ctx);
  };
  auto toggle_refused = [](Ctx& ctx) {
    ctx.env().api().configure_blocking(server_of(ctx), !ctx.vars().get<bool>("blocking"));
  };
  auto accept_refused = [](Ctx& ctx) { ctx.env().api().accept(server_of(ctx)); };

  std::vector<T> ts;
  ts.push_back(T::self("bound", "toggleBlocking", toggle));
  ts.push_back(T::self("bound", "getLocalPort", local_port));
  ts.push_back(T::self("bound", "bind", rebind).expect_error(ErrorKind::AlreadyBound, "bound"));
  ts.push_back(T::edge("bound", "selectorConfigured", "configureSelector", configure_selector));
  ts.push_back(T::edge("bound", "closed", "close", close).with_weight(0.25));
  for (const char* s : {"selectorConfigured", "accepting", "connected"}) {
    // Registered channels refuse to switch back to blocking mode.
    ts.push_back(T::self(s, "toggleBlocking", toggle_refused)
                     .expect_error(ErrorKind::IllegalBlockingMode, s));
    ts.push_back(T::self(s, "getLocalPort", local_port));
    ts.push_back(T::self(s, "bind", rebind).expect_error(ErrorKind::AlreadyBound, s));
    ts.push_back(T::self(s, "checkSelector", check_selector));
    ts.push_back(T::self(s, "launchClient", launch).when(can_launch));
    ts.push_back(T::self(s, "accept", accept)
                     .branch("nullResult", "accepting")
                     .branch("connected", "connected"));
    ts.push_back(T::edge(s, "closed", "close", close).with_weight(0.25));
  }
  ts.push_back(T::self("closed", "bind", probe(rebind))
                   .when(probes_left)
                   .expect_error(ErrorKind::ClosedChannel, "closed"));
  ts.push_back(T::self("closed", "toggleBlocking", probe(toggle_refused))
                   .when(probes_left)
                   .expect_error(ErrorKind::ClosedChannel, "closed"));
  ts.push_back(T::edge("closed", "err", "accept", accept_refused)
                   .expect_error(ErrorKind::ClosedChannel, "err"));
  return efsm::define_model<NetEnv>(
      "server-main", "bound",
      {"bound", "selectorConfigured", "accepting", "connected", "closed", "err"}, std::move(ts),
      ctor);
}

// --- minimalist server (blocking) -----------------------------------------

/// `client_first` is the correct order: the client's constructor connects
/// before the blocking accept runs. The other order waits forever.
inline NetSpec build_minimalist(bool client_first) {
  auto ctor = [](Ctx& ctx) { open_and_bind(ctx); };
  auto session = [client_first](Ctx& ctx) {
    std::optional<ConnId> conn;
    if (client_first) {
      launch_client(ctx);
      conn = ctx.env().api().accept(server_of(ctx));
    } else {
      conn = ctx.env().api().accept(server_of(ctx));
      launch_client(ctx);
    }
    require(conn.has_value(), "blocking accept returned no connection");
    ctx.launch(worker_model(), Vars{{"conn", *conn}});
    ctx.vars().increment("sessions");
  };
  auto can_start = [](const Vars& v) {
    return v.get_or<std::int64_t>("sessions", 0) < v.get<std::int64_t>("maxConnections");
  };
  std::vector<T> ts;
  ts.push_back(T::self("bound", "session", session).when(can_start));
  ts.push_back(T::edge("bound", "closed", "close", close_listener).with_weight(0.25));
  return efsm::define_model<NetEnv>(client_first ? "minimalist" : "minimalist-misordered",
                                    "bound", {"bound", "closed"}, std::move(ts), ctor);
}

}  // namespace models

inline NetSpec client_model() {
  static const NetSpec spec = models::build_client();
  return spec;
}

inline NetSpec worker_model() {
  static const NetSpec spec = models::build_worker();
  return spec;
}

inline NetSpec server_main_model() {
  static const NetSpec spec = models::build_server_main();
  return spec;
}

inline NetSpec minimalist_model() {
  static const NetSpec spec = models::build_minimalist(true);
  return spec;
}

/// Accepts before launching the client: deadlocks by construction.
inline NetSpec misordered_minimalist_model() {
  static const NetSpec spec = models::build_minimalist(false);
  return spec;
}

namespace models {
inline NetSpec worker_model() { return netmbt::worker_model(); }
inline NetSpec client_model() { return netmbt::client_model(); }
}  // namespace models

struct RegisteredModel {
  NetSpec (*factory)();
  bool runnable;  // can be the root of a suite
  const char* summary;
};

inline const std::map<std::string, RegisteredModel>& model_registry() {
  static const std::map<std::string, RegisteredModel> registry = {
      {"minimalist", {&minimalist_model, true, "blocking server: launch client, accept, launch worker"}},
      {"server-main", {&server_main_model, true, "selector-based server main thread"}},
      {"worker", {&worker_model, false, "server side of one connection (launched by a server)"}},
      {"client", {&client_model, false, "client connection (launched by a server)"}},
      {"minimalist-misordered",
       {&misordered_minimalist_model, true, "minimalist server that accepts before launching the client"}},
  };
  return registry;
}

}  // namespace netmbt
