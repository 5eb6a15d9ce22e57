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

#include <map>
#include <sstream>
#include <thread>

#include "netmbt/explorer.hpp"

namespace efsm = netmbt::efsm;
using netmbt::Explorer;
using netmbt::RunConfig;
using netmbt::SeededRng;

namespace {

struct Env {
  int steps = 0;
  bool torn_down = false;
  void after_step() { ++steps; }
  void teardown() { torn_down = true; }
};

using T = efsm::Transition<Env>;
using Ctx = efsm::ActionContext<Env>;
auto noop = [](Ctx&) {};

Explorer<Env> explorer(RunConfig rc) {
  return Explorer<Env>(std::move(rc), [](const netmbt::TestSetup&) { return std::make_unique<Env>(); });
}

// Counter model: a few steps, then it can fail when `fail_at` is reached.
efsm::SpecPtr<Env> counter(std::int64_t fail_at = -1) {
  return efsm::define_model<Env>(
      "counter", "run", {"run", "done"},
      {T::self("run", "inc",
               [fail_at](Ctx& ctx) {
                 const auto n = ctx.vars().increment("n");
                 netmbt::require(n != fail_at, "count reached " + std::to_string(n));
               }),
       T::self("run", "coin", [](Ctx& ctx) { ctx.emit(netmbt::maybe(ctx.rng(), 0.5) ? "heads" : "tails"); })
           .branch("heads", "run")
           .branch("tails", "run"),
       T::edge("run", "done", "stop", noop).with_weight(0.2)});
}

}  // namespace

TEST(PickNext, SinglePairHasProbabilityOne) {
  auto spec = efsm::define_model<Env>("m", "A", {"A"}, {T::self("A", "only", noop)});
  efsm::ModelInstance<Env> inst{1, spec, "A", {}, false};
  SeededRng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto p = netmbt::pick_next<Env>({&inst}, rng);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->transition->label, "only");
  }
}

TEST(PickNext, NothingEnabledIsEmpty) {
  auto spec = efsm::define_model<Env>("m", "A", {"A"}, {});
  efsm::ModelInstance<Env> inst{1, spec, "A", {}, false};
  SeededRng rng(1);
  EXPECT_FALSE(netmbt::pick_next<Env>({&inst}, rng));
  EXPECT_FALSE(netmbt::pick_next<Env>({}, rng));
}

TEST(PickNext, SameRngStateSamePick) {
  auto spec = efsm::define_model<Env>(
      "m", "A", {"A"}, {T::self("A", "a", noop), T::self("A", "b", noop), T::self("A", "c", noop)});
  efsm::ModelInstance<Env> inst{1, spec, "A", {}, false};
  SeededRng r1(77), r2(77);
  for (int i = 0; i < 200; ++i) {
    EXPECT_EQ(netmbt::pick_next<Env>({&inst}, r1)->transition,
              netmbt::pick_next<Env>({&inst}, r2)->transition);
  }
}

// Two instances, 2 + 3 unit-weight transitions: each of the five pairs is
// picked with probability 1/5. Over 50,000 draws the standard deviation of a
// frequency is about 0.0018, so the 0.01 window is more than 5 sd wide.
TEST(PickNext, UniformOverInstanceTransitionPairs) {
  auto two = efsm::define_model<Env>("two", "A", {"A"}, {T::self("A", "a", noop), T::self("A", "b", noop)});
  auto three = efsm::define_model<Env>(
      "three", "A", {"A"}, {T::self("A", "x", noop), T::self("A", "y", noop), T::self("A", "z", noop)});
  efsm::ModelInstance<Env> i1{1, two, "A", {}, false};
  efsm::ModelInstance<Env> i2{2, three, "A", {}, false};
  SeededRng rng(2024);
  std::map<std::pair<int, std::string>, int> counts;
  constexpr int kDraws = 50000;
  for (int i = 0; i < kDraws; ++i) {
    const auto p = netmbt::pick_next<Env>({&i1, &i2}, rng);
    ++counts[{p->instance->id, p->transition->label}];
  }
  ASSERT_EQ(counts.size(), 5u);
  for (const auto& [pair, n] : counts) {
    EXPECT_NEAR(static_cast<double>(n) / kDraws, 0.2, 0.01) << pair.second;
  }
}

TEST(PickNext, ConsumesOneDrawPerCall) {
  auto spec = efsm::define_model<Env>("m", "A", {"A"}, {T::self("A", "a", noop), T::self("A", "b", noop)});
  efsm::ModelInstance<Env> inst{1, spec, "A", {}, false};
  SeededRng a(5), b(5);
  netmbt::pick_next<Env>({&inst}, a);
  b.next_u64();
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RunSuite, EmptySpecPassesWithZeroSteps) {
  RunConfig rc;
  rc.num_tests = 5;
  auto ex = explorer(rc);
  const auto report = ex.run_suite(efsm::define_model<Env>("empty", "S0", {"S0"}, {}));
  EXPECT_EQ(report.tests_run, 5u);
  EXPECT_EQ(report.passed, 5u);
  EXPECT_EQ(report.total_steps, 0u);
}

TEST(RunSuite, StepBudgetIsRespected) {
  RunConfig rc;
  rc.num_tests = 20;
  rc.max_steps = 7;
  auto ex = explorer(rc);
  auto loop = efsm::define_model<Env>("loop", "A", {"A"}, {T::self("A", "spin", noop)});
  const auto report = ex.run_suite(loop);
  EXPECT_EQ(report.total_steps, 20u * 7u);
}

TEST(RunSuite, FailureIsRecordedAndAbortStops) {
  RunConfig rc;
  rc.num_tests = 50;
  rc.seed = 3;
  auto ex = explorer(rc);
  const auto report = ex.run_suite(counter(3));
  EXPECT_GT(report.failed, 0u);
  ASSERT_FALSE(report.failures.empty());
  EXPECT_EQ(report.failures[0].verdict.message, "count reached 3");

  rc.abort_on_first_failure = true;
  auto ex2 = explorer(rc);
  const auto aborted = ex2.run_suite(counter(3));
  EXPECT_EQ(aborted.failed, 1u);
  EXPECT_TRUE(aborted.aborted);
  EXPECT_LT(aborted.tests_run, 50u);
}

TEST(RunSuite, DeterministicTraces) {
  RunConfig rc;
  rc.num_tests = 30;
  rc.seed = 42;
  std::ostringstream a, b;
  explorer(rc).run_suite(counter(), &a);
  explorer(rc).run_suite(counter(), &b);
  EXPECT_EQ(a.str(), b.str());
  rc.seed = 43;
  std::ostringstream c;
  explorer(rc).run_suite(counter(), &c);
  EXPECT_NE(a.str(), c.str());
}

TEST(RunTest, AfterStepAndTeardownAreCalled) {
  Env* seen = nullptr;
  int after = 0;
  bool down = false;
  RunConfig rc;
  rc.max_steps = 4;
  Explorer<Env> ex(rc, [&](const netmbt::TestSetup&) {
    auto e = std::make_unique<Env>();
    seen = e.get();
    return e;
  });
  struct Probe {};
  auto loop = efsm::define_model<Env>("loop", "A", {"A"}, {T::self("A", "spin", [&](Ctx& ctx) {
                                        after = ctx.env().steps;
                                        down = ctx.env().torn_down;
                                      })});
  ex.run_test(loop, 0, 1);
  ASSERT_NE(seen, nullptr);
  EXPECT_EQ(after, 3);  // the fourth step sees three completed steps
  EXPECT_FALSE(down);
}

TEST(RunTest, LaunchRecordsFollowTheirStep) {
  auto child = efsm::define_model<Env>("child", "c", {"c", "end"}, {T::edge("c", "end", "finish", noop)});
  auto parent = efsm::define_model<Env>(
      "parent", "p", {"p", "q"}, {T::edge("p", "q", "spawn", [child](Ctx& ctx) { ctx.launch(child); })});
  RunConfig rc;
  auto ex = explorer(rc);
  const auto t = ex.run_test(parent, 0, 9);
  std::vector<std::string> lines;
  for (const auto& e : t.entries) lines.push_back(netmbt::to_line(e));
  EXPECT_EQ(lines, (std::vector<std::string>{"launch 1 parent p", "0 1 parent spawn - q",
                                             "launch 2 child c", "1 2 child finish - end"}));
  EXPECT_TRUE(t.verdict.pass);
}

TEST(RunTest, WatchdogTurnsABlockIntoAFailure) {
  auto blocker = efsm::define_model<Env>("blocker", "A", {"A"}, {T::self("A", "wait", [](Ctx&) {
                                           throw netmbt::WatchdogExpired("blocking accept");
                                         })});
  RunConfig rc;
  rc.watchdog = std::chrono::milliseconds(50);
  const auto t = explorer(rc).run_test(blocker, 0, 1);
  EXPECT_FALSE(t.verdict.pass);
  EXPECT_EQ(t.verdict.message.rfind("watchdog:", 0), 0u);
  EXPECT_EQ(netmbt::to_line(t.entries.back()), "0 1 blocker wait fail A");
}

TEST(RunTest, SlowStepExceedsWatchdog) {
  auto slow = efsm::define_model<Env>("slow", "A", {"A"}, {T::self("A", "nap", [](Ctx&) {
                                        std::this_thread::sleep_for(std::chrono::milliseconds(30));
                                      })});
  RunConfig rc;
  rc.watchdog = std::chrono::milliseconds(10);
  const auto t = explorer(rc).run_test(slow, 0, 1);
  EXPECT_FALSE(t.verdict.pass);
  EXPECT_NE(t.verdict.message.find("watchdog"), std::string::npos);
}

TEST(Watchdog, RemainingShrinksAndRearms) {
  netmbt::Watchdog w(std::chrono::milliseconds(40));
  std::this_thread::sleep_for(std::chrono::milliseconds(45));
  EXPECT_TRUE(w.expired());
  EXPECT_EQ(w.remaining().count(), 0);
  w.arm();
  EXPECT_FALSE(w.expired());
  EXPECT_GT(w.remaining().count(), 0);
}

TEST(Replay, PassingTraceReplaysIdentically) {
  RunConfig rc;
  auto ex = explorer(rc);
  const auto t = ex.run_test(counter(), 4, netmbt::derive_test_seed(1, 4));
  const auto again = ex.replay(t, counter());
  EXPECT_EQ(again.entries, t.entries);
}

TEST(Replay, DifferentSeedDiverges) {
  RunConfig rc;
  auto ex = explorer(rc);
  auto t = ex.run_test(counter(), 0, 11);
  ASSERT_GT(t.step_count(), 1u);
  t.test_seed = 12;
  EXPECT_THROW(ex.replay(t, counter()), netmbt::DivergenceError);
}

TEST(Replay, FailureReproducesAtSameStep) {
  RunConfig rc;
  rc.num_tests = 40;
  rc.seed = 8;
  auto ex = explorer(rc);
  const auto report = ex.run_suite(counter(4));
  ASSERT_FALSE(report.failures.empty());
  const auto& failed = report.failures.front();
  const auto again = ex.replay(failed, counter(4));
  EXPECT_FALSE(again.verdict.pass);
  EXPECT_EQ(again.last_step_index(), failed.last_step_index());
}

TEST(Replay, TamperedVerdictDiverges) {
  RunConfig rc;
  auto ex = explorer(rc);
  auto t = ex.run_test(counter(), 0, 5);
  t.verdict = netmbt::Verdict{false, "made up"};
  EXPECT_THROW(ex.replay(t, counter()), netmbt::DivergenceError);
}

TEST(Coverage, ComputedFromTraces) {
  RunConfig rc;
  rc.num_tests = 50;
  auto ex = explorer(rc);
  const auto report = ex.run_suite(counter());
  const auto& cov = report.coverage.models().at("counter");
  EXPECT_EQ(cov.states.size(), 2u);
  EXPECT_EQ(cov.transitions.size(), 3u);
  EXPECT_TRUE(cov.complete());
}

TEST(RunConfig, Validation) {
  RunConfig rc;
  rc.num_tests = 0;
  EXPECT_THROW(rc.validate(), netmbt::ConfigError);
  rc.num_tests = 1;
  rc.max_steps = 0;
  EXPECT_THROW(rc.validate(), netmbt::ConfigError);
}
