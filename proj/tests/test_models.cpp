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

#include <gtest/gtest.h>

#include "netmbt/models.hpp"
#include "netmbt/simnet.hpp"
#include "netmbt/suite.hpp"

namespace efsm = netmbt::efsm;
using netmbt::NetEnv;
using netmbt::Side;
using netmbt::sim::FaultKind;
using netmbt::sim::LatencyModel;
using netmbt::sim::SimNetwork;

namespace {

// Drives model instances by hand on a zero-latency simulated network.
struct Driver {
  explicit Driver(netmbt::ModelParams params = {}, LatencyModel latency = LatencyModel::zero(),
                  std::optional<netmbt::sim::FaultSpec> fault = std::nullopt)
      : net(new SimNetwork(1, latency, fault)),
        env(std::unique_ptr<netmbt::SocketApi>(net), params),
        pool(env) {}

  efsm::ModelInstance<NetEnv>& start(const netmbt::NetSpec& spec) {
    return pool.instantiate(spec, {}, rng);
  }

  efsm::StepOutcome fire(efsm::ModelInstance<NetEnv>& inst, const std::string& label) {
    for (const auto* t : efsm::enabled_transitions(inst)) {
      if (t->label == label) {
        auto out = pool.fire(inst, *t, rng);
        pool.adopt_launches();
        return out;
      }
    }
    ADD_FAILURE() << label << " not enabled in " << inst.spec->name << "." << inst.current;
    return {};
  }

  efsm::ModelInstance<NetEnv>& instance(int id) { return *pool.find(id); }

  SimNetwork* net;
  NetEnv env;
  efsm::InstancePool<NetEnv> pool;
  netmbt::SeededRng rng{3};
};

}  // namespace

TEST(Minimalist, OneSessionThenClose) {
  Driver d;
  auto& server = d.start(netmbt::minimalist_model());
  const auto session = d.fire(server, "session");
  ASSERT_FALSE(session.violated()) << session.message;
  EXPECT_EQ(session.launched, (std::vector<int>{2, 3}));
  EXPECT_EQ(d.instance(2).spec->name, "client");
  EXPECT_EQ(d.instance(3).spec->name, "worker");
  EXPECT_FALSE(d.fire(server, "close").violated());
  ASSERT_EQ(d.env.ledger().size(), 1u);
  EXPECT_EQ(d.env.ledger().at(0).at(Side::Client).owner, 2);
  EXPECT_EQ(d.env.ledger().at(0).at(Side::Server).owner, 3);
}

TEST(Minimalist, ImmediateCloseLeavesLedgerEmpty) {
  Driver d;
  auto& server = d.start(netmbt::minimalist_model());
  EXPECT_FALSE(d.fire(server, "close").violated());
  EXPECT_TRUE(d.env.ledger().empty());
  EXPECT_FALSE(server.alive());
}

TEST(Minimalist, SessionsAreCapped) {
  netmbt::ModelParams params;
  params.max_connections = 2;
  Driver d(params);
  auto& server = d.start(netmbt::minimalist_model());
  d.fire(server, "session");
  d.fire(server, "session");
  for (const auto* t : efsm::enabled_transitions(server)) EXPECT_NE(t->label, "session");
}

TEST(Minimalist, MisorderedDeadlocksIntoWatchdog) {
  Driver d;
  auto& server = d.start(netmbt::misordered_minimalist_model());
  EXPECT_THROW(d.fire(server, "session"), netmbt::WatchdogExpired);
}

TEST(Minimalist, MisorderedFailsOnRealBackendWithinBound) {
  netmbt::SuiteConfig c;
  c.model = "minimalist-misordered";
  c.backend = netmbt::Backend::Real;
  c.watchdog = std::chrono::milliseconds(300);
  auto ex = netmbt::make_explorer(c);
  auto spec = c.root();
  // Find a test whose first step is the session rather than the close.
  for (std::size_t i = 0; i < 20; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const auto t = ex.run_test(spec, i, netmbt::derive_test_seed(1, i));
    if (t.verdict.pass) continue;
    EXPECT_EQ(t.verdict.message.rfind("watchdog:", 0), 0u) << t.verdict.message;
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(1500));
    return;
  }
  FAIL() << "no test reached the blocking accept";
}

TEST(ServerMain, AcceptNullThenConnected) {
  Driver d;
  auto& server = d.start(netmbt::server_main_model());
  EXPECT_FALSE(d.fire(server, "configureSelector").violated());
  auto out = d.fire(server, "accept");
  EXPECT_EQ(out.outcome_tag, "nullResult");
  EXPECT_EQ(server.current, "accepting");
  EXPECT_FALSE(d.fire(server, "checkSelector").violated());
  d.fire(server, "launchClient");
  out = d.fire(server, "accept");
  ASSERT_FALSE(out.violated()) << out.message;
  EXPECT_EQ(out.outcome_tag, "connected");
  EXPECT_EQ(server.current, "connected");
  EXPECT_EQ(out.launched.size(), 1u);
}

TEST(ServerMain, RedTransitionsHold) {
  Driver d;
  auto& server = d.start(netmbt::server_main_model());
  auto out = d.fire(server, "bind");
  EXPECT_EQ(out.raised_error, netmbt::ErrorKind::AlreadyBound);
  EXPECT_EQ(server.current, "bound");
  d.fire(server, "toggleBlocking");
  d.fire(server, "toggleBlocking");
  EXPECT_FALSE(d.fire(server, "getLocalPort").violated());
  d.fire(server, "configureSelector");
  out = d.fire(server, "toggleBlocking");
  EXPECT_FALSE(out.violated()) << out.message;
  EXPECT_EQ(out.raised_error, netmbt::ErrorKind::IllegalBlockingMode);
  d.fire(server, "close");
  out = d.fire(server, "accept");
  EXPECT_FALSE(out.violated()) << out.message;
  EXPECT_EQ(out.raised_error, netmbt::ErrorKind::ClosedChannel);
  EXPECT_EQ(server.current, "err");
  EXPECT_FALSE(server.alive());
}

TEST(ServerMain, ClosedStateProbesAreBounded) {
  Driver d;
  auto& server = d.start(netmbt::server_main_model());
  d.fire(server, "close");
  d.fire(server, "bind");
  d.fire(server, "toggleBlocking");
  for (const auto* t : efsm::enabled_transitions(server)) EXPECT_EQ(t->label, "accept");
}

namespace {

// server-main with one client and its worker, both connected.
struct Session {
  explicit Session(Driver& d) : server(d.start(netmbt::server_main_model())) {
    d.fire(server, "configureSelector");
    d.fire(server, "launchClient");
    const auto out = d.fire(server, "accept");
    client = &d.instance(2);
    worker = &d.instance(out.launched.at(0));
  }
  efsm::ModelInstance<NetEnv>& server;
  efsm::ModelInstance<NetEnv>* client = nullptr;
  efsm::ModelInstance<NetEnv>* worker = nullptr;
};

}  // namespace

TEST(Worker, ReadsWithinLedger) {
  Driver d;
  Session s(d);
  ASSERT_FALSE(d.fire(*s.client, "write").violated());
  const auto out = d.fire(*s.worker, "read");
  EXPECT_FALSE(out.violated()) << out.message;
  const auto& c = d.env.ledger().at(0);
  EXPECT_LE(c.at(Side::Server).read, c.at(Side::Client).wrote);
  EXPECT_GT(c.at(Side::Server).read, 0u);
}

TEST(Worker, DuplicatedBytesViolateLedger) {
  Driver d({}, LatencyModel::zero(), netmbt::sim::FaultSpec{FaultKind::DuplicateBytes, 0});
  Session s(d);
  d.fire(*s.client, "write");
  efsm::StepOutcome out;
  for (int i = 0; i < 10 && !out.violated(); ++i) out = d.fire(*s.worker, "read");
  ASSERT_TRUE(out.violated());
  EXPECT_NE(out.message.find("read exceeds ledger"), std::string::npos) << out.message;
}

TEST(Worker, HalfCloseTransitions) {
  Driver d;
  Session s(d);
  d.fire(*s.worker, "shutdownOutput");
  auto out = d.fire(*s.worker, "write");
  EXPECT_FALSE(out.violated()) << out.message;
  EXPECT_EQ(out.raised_error, netmbt::ErrorKind::OutputShutdown);
  EXPECT_EQ(s.worker->current, "outShut");
  EXPECT_FALSE(d.fire(*s.worker, "checkSelector").violated());
  d.fire(*s.worker, "shutdownInput");
  EXPECT_EQ(s.worker->current, "shut");
  out = d.fire(*s.worker, "read");
  EXPECT_EQ(out.raised_error, netmbt::ErrorKind::InputShutdown);
  d.fire(*s.worker, "close");
  out = d.fire(*s.worker, "read");
  EXPECT_EQ(out.raised_error, netmbt::ErrorKind::ClosedChannel);
  EXPECT_FALSE(out.violated());
}

TEST(Worker, PhantomReadinessIsCaught) {
  Driver d({}, LatencyModel::zero(), netmbt::sim::FaultSpec{FaultKind::PhantomReadiness, 0});
  Session s(d);
  const auto out = d.fire(*s.worker, "checkSelector");
  ASSERT_TRUE(out.violated());
  EXPECT_NE(out.message.find("selector reported READ"), std::string::npos) << out.message;
}

TEST(Client, ReadsBoundedByWorkerWrites) {
  Driver d;
  Session s(d);
  d.fire(*s.worker, "write");
  const auto written = d.env.ledger().at(0).at(Side::Server).wrote;
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(d.fire(*s.client, "read").violated());
  EXPECT_LE(d.env.ledger().at(0).at(Side::Client).read, written);
}

TEST(Client, ForcedCloseThenWorkerSeesPeerClosure) {
  netmbt::ModelParams params;
  params.p_close = 1.0;
  Driver d(params);
  Session s(d);
  auto out = d.fire(*s.client, "maybeClose");
  EXPECT_EQ(out.outcome_tag, "closed");
  EXPECT_EQ(s.client->current, "closed");
  EXPECT_FALSE(d.fire(*s.worker, "write").violated());
  out = d.fire(*s.worker, "write");
  EXPECT_FALSE(out.violated()) << out.message;
  EXPECT_EQ(out.raised_error, netmbt::ErrorKind::ConnectionReset);
  EXPECT_EQ(s.worker->current, "reset");
}

TEST(Client, EndOfStreamAfterServerCloseAndDrain) {
  Driver d;
  Session s(d);
  d.fire(*s.worker, "write");
  d.fire(*s.worker, "close");
  efsm::StepOutcome out;
  for (int i = 0; i < 10 && s.client->current == "open"; ++i) out = d.fire(*s.client, "read");
  EXPECT_FALSE(out.violated()) << out.message;
  EXPECT_EQ(s.client->current, "eof");
  d.fire(*s.client, "close");
  EXPECT_FALSE(s.client->alive());
}

TEST(Registry, NamesAndRunnability) {
  const auto& reg = netmbt::model_registry();
  for (const char* n : {"minimalist", "server-main", "worker", "client", "minimalist-misordered"}) {
    ASSERT_TRUE(reg.count(n)) << n;
    EXPECT_EQ(reg.at(n).factory()->name, n);
  }
  EXPECT_FALSE(reg.at("worker").runnable);
  EXPECT_FALSE(reg.at("client").runnable);
}

namespace {

netmbt::SuiteReport sim_suite(const std::string& model, std::size_t tests, std::size_t max_steps = 100,
                              std::optional<FaultKind> fault = std::nullopt, std::uint64_t seed = 1) {
  netmbt::SuiteConfig c;
  c.model = model;
  c.tests = tests;
  c.max_steps = max_steps;
  c.fault = fault;
  c.seed = seed;
  return netmbt::run_net_suite(c);
}

std::string first_failure(const netmbt::SuiteReport& r) {
  return r.failures.empty() ? "" : r.failures.front().verdict.message;
}

}  // namespace

TEST(Suites, MinimalistTerminatesWithoutFailures) {
  const auto r = sim_suite("minimalist", 1000, 50);
  EXPECT_EQ(r.failed, 0u) << first_failure(r);
  EXPECT_LT(r.total_steps, 1000u * 50u);  // not every test runs out the budget
}

TEST(Suites, ServerMainWithoutFailures) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = sim_suite("server-main", 1000, 100, std::nullopt, seed);
    EXPECT_EQ(r.failed, 0u) << first_failure(r);
  }
}

TEST(Suites, FullCoverageOfAllFourModels) {
  const auto main = sim_suite("server-main", 1000);
  const auto mini = sim_suite("minimalist", 1000);
  for (const auto* r : {&main, &mini}) {
    for (const auto& [name, cov] : r->coverage.models()) {
      EXPECT_TRUE(cov.complete()) << name << " states " << cov.states_covered() << "/" << cov.states.size()
                                  << " transitions " << cov.transitions_covered() << "/"
                                  << cov.transitions.size();
    }
  }
  EXPECT_TRUE(main.coverage.models().count("worker"));
  EXPECT_TRUE(main.coverage.models().count("client"));
  EXPECT_TRUE(mini.coverage.models().count("minimalist"));
}

TEST(Suites, DuplicateBytesIsDetected) {
  const auto r = sim_suite("minimalist", 1000, 100, FaultKind::DuplicateBytes);
  ASSERT_GT(r.failed, 0u);
  EXPECT_NE(first_failure(r).find("read exceeds ledger"), std::string::npos) << first_failure(r);
}

TEST(Suites, PhantomReadinessIsDetected) {
  const auto r = sim_suite("server-main", 1000, 100, FaultKind::PhantomReadiness);
  ASSERT_GT(r.failed, 0u);
  EXPECT_NE(first_failure(r).find("selector reported READ"), std::string::npos) << first_failure(r);
}

TEST(Suites, DroppedBytesLookLikeLatency) {
  EXPECT_EQ(sim_suite("server-main", 1000, 100, FaultKind::DropBytes).failed, 0u);
  EXPECT_EQ(sim_suite("minimalist", 1000, 100, FaultKind::DropBytes).failed, 0u);
}
