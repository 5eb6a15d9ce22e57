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

// Random exploration of EFSM models: interleaves all live instances, records
// a replayable trace per test and aggregates coverage over a suite.

#include <chrono>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "netmbt/efsm.hpp"
#include "netmbt/errors.hpp"
#include "netmbt/rng.hpp"
#include "netmbt/trace.hpp"

namespace netmbt {

/// Wall-clock bound on a single step. Backends consult `remaining()` before
/// blocking; the explorer re-arms it before every step.
class Watchdog {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Watchdog(std::chrono::milliseconds bound) : bound_(bound) { arm(); }

  void arm() { deadline_ = Clock::now() + bound_; }

  std::chrono::milliseconds remaining() const {
    const auto left = deadline_ - Clock::now();
    if (left <= Clock::duration::zero()) return std::chrono::milliseconds(0);
    return std::chrono::ceil<std::chrono::milliseconds>(left);
  }

  bool expired() const { return Clock::now() >= deadline_; }
  std::chrono::milliseconds bound() const { return bound_; }

 private:
  std::chrono::milliseconds bound_;
  Clock::time_point deadline_;
};

/// Per-test environment handed to model actions.
template <typename E>
concept TestEnvironment = requires(E& e) {
  e.after_step();
  e.teardown();
};

struct TestSetup {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Watchdog* watchdog = nullptr;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t num_tests = 1;
  std::size_t max_steps = 100;
  bool abort_on_first_failure = false;
  std::optional<std::chrono::milliseconds> watchdog;
  std::string backend_label = "sim";
  std::vector<std::pair<std::string, std::string>> meta;

  void validate() const {
    if (num_tests < 1) throw ConfigError("number of tests must be at least 1");
    if (max_steps < 1) throw ConfigError("max steps per test must be at least 1");
    if (watchdog && watchdog->count() <= 0) throw ConfigError("watchdog bound must be positive");
  }
};

struct ModelCoverage {
  std::vector<std::string> states;       // declared
  std::vector<std::string> transitions;  // declared, "source/label"
  std::map<std::string, std::size_t> state_hits;
  std::map<std::string, std::size_t> transition_hits;

  std::size_t states_covered() const { return covered(states, state_hits); }
  std::size_t transitions_covered() const {
    return covered(transitions, transition_hits);
  }
  bool complete() const {
    return states_covered() == states.size() &&
           transitions_covered() == transitions.size();
  }

 private:
  static std::size_t covered(const std::vector<std::string>& declared,
                             const std::map<std::string, std::size_t>& hits) {
    std::size_t n = 0;
    for (const auto& d : declared) {
      auto it = hits.find(d);
      n += it != hits.end() && it->second > 0;
    }
    return n;
  }
};

/// State and transition hit counts, computed from traces alone. Declared
/// totals come from the model specs when they are known.
class CoverageTally {
 public:
  template <typename Env>
  void declare(const efsm::ModelSpec<Env>& spec) {
    auto& m = models_[spec.name];
    if (!m.states.empty() || !m.transitions.empty()) return;
    m.states = spec.states;
    for (const auto& t : spec.transitions) m.transitions.push_back(spec.transition_key(t));
  }

  void add(const Trace& trace) {
    std::map<int, std::pair<std::string, std::string>> where;  // id -> (model, state)
    for (const auto& entry : trace.entries) {
      if (const auto* l = std::get_if<LaunchRecord>(&entry)) {
        where[l->instance_id] = {l->model, l->state};
        ++models_[l->model].state_hits[l->state];
        continue;
      }
      const auto& s = std::get<StepRecord>(entry);
      auto& [model, state] = where[s.instance_id];
      auto& m = models_[s.model];
      ++m.transition_hits[state + "/" + s.label];
      ++m.state_hits[s.state];
      model = s.model;
      state = s.state;
    }
  }

  const std::map<std::string, ModelCoverage>& models() const { return models_; }

 private:
  std::map<std::string, ModelCoverage> models_;
};

struct SuiteReport {
  std::size_t tests_run = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t total_steps = 0;
  bool aborted = false;
  CoverageTally coverage;
  std::vector<Trace> failures;

  bool all_passed() const { return failed == 0; }
};

/// Result of pickNext: the instance and the transition to fire.
template <typename Env>
struct Pick {
  efsm::ModelInstance<Env>* instance = nullptr;
  const efsm::Transition<Env>* transition = nullptr;
};

/// Samples one enabled (instance, transition) pair with probability
/// proportional to the transition weight. Consumes exactly one draw.
template <typename Env>
std::optional<Pick<Env>> pick_next(
    const std::vector<efsm::ModelInstance<Env>*>& live, SeededRng& rng) {
  std::vector<Pick<Env>> pairs;
  double total = 0.0;
  for (auto* inst : live) {
    for (const auto* t : efsm::enabled_transitions(*inst)) {
      pairs.push_back({inst, t});
      total += t->weight;
    }
  }
  const double u = rng.uniform01() * total;
  if (pairs.empty()) return std::nullopt;
  double acc = 0.0;
  for (const auto& p : pairs) {
    acc += p.transition->weight;
    if (u < acc) return p;
  }
  return pairs.back();
}

template <TestEnvironment Env>
class Explorer {
 public:
  using EnvFactory = std::function<std::unique_ptr<Env>(const TestSetup&)>;

  Explorer(RunConfig config, EnvFactory factory)
      : config_(std::move(config)), factory_(std::move(factory)) {
    config_.validate();
  }

  const RunConfig& config() const { return config_; }

  /// One test from its seed: fresh environment, root instance, interleaved
  /// steps until nothing is enabled, the budget is spent or a property fails.
  Trace run_test(const efsm::SpecPtr<Env>& root, std::size_t index,
                 std::uint64_t seed, CoverageTally* tally = nullptr) {
    Trace trace;
    trace.test_seed = seed;
    trace.test_index = index;
    trace.backend = config_.backend_label;
    trace.meta = config_.meta;

    SeededRng rng(seed);
    std::optional<Watchdog> watchdog;
    if (config_.watchdog) watchdog.emplace(*config_.watchdog);
    std::unique_ptr<Env> env = factory_(TestSetup{index, seed, watchdog ? &*watchdog : nullptr});
    efsm::InstancePool<Env> pool(*env);

    auto flush_launches = [&] {
      for (auto& ev : pool.take_launch_events()) {
        trace.entries.emplace_back(LaunchRecord{ev.instance_id, ev.model, ev.state});
      }
    };
    auto fail = [&](std::string message) {
      trace.verdict = Verdict{false, single_line(std::move(message))};
    };

    try {
      pool.instantiate(root, {}, rng);
      flush_launches();
      for (std::size_t step = 0; step < config_.max_steps; ++step) {
        std::optional<Pick<Env>> pick;
        try {
          pick = pick_next(pool.live(), rng);
        } catch (const PropertyViolation& e) {
          fail(e.what());
          break;
        }
        if (!pick) break;
        auto& inst = *pick->instance;
        const auto& t = *pick->transition;
        StepRecord record{step, inst.id, inst.spec->name, t.label, "fail", inst.current};
        if (watchdog) watchdog->arm();
        efsm::StepOutcome out;
        try {
          out = pool.fire(inst, t, rng);
        } catch (const WatchdogExpired& e) {
          trace.entries.emplace_back(record);
          flush_launches();
          fail(std::string("watchdog: ") + e.what());
          break;
        }
        if (out.raised_error) {
          record.outcome = "exc:" + std::string(to_string(*out.raised_error));
        } else if (!out.violated()) {
          record.outcome = out.outcome_tag.value_or("-");
        }
        record.state = inst.current;
        trace.entries.emplace_back(record);
        flush_launches();
        pool.adopt_launches();
        if (out.violated()) {
          fail(out.message);
          break;
        }
        if (watchdog && watchdog->expired()) {
          fail("watchdog: step exceeded " + std::to_string(watchdog->bound().count()) + " ms");
          break;
        }
        env->after_step();
      }
    } catch (const PropertyViolation& e) {
      flush_launches();
      fail(e.what());
    } catch (const WatchdogExpired& e) {
      flush_launches();
      fail(std::string("watchdog: ") + e.what());
    }
    env->teardown();
    if (tally) {
      for (const auto& [name, spec] : pool.specs()) tally->declare(*spec);
    }
    return trace;
  }

  /// Runs the configured number of tests. Traces are streamed to
  /// `trace_out` when given; failing traces are also kept in the report.
  SuiteReport run_suite(const efsm::SpecPtr<Env>& root,
                        std::ostream* trace_out = nullptr) {
    SuiteReport report;
    report.coverage.declare(*root);
    for (std::size_t i = 0; i < config_.num_tests; ++i) {
      Trace trace = run_test(root, i, derive_test_seed(config_.seed, i), &report.coverage);
      if (trace_out) write_trace(*trace_out, trace);
      report.coverage.add(trace);
      ++report.tests_run;
      report.total_steps += trace.step_count();
      if (trace.verdict.pass) {
        ++report.passed;
      } else {
        ++report.failed;
        report.failures.push_back(std::move(trace));
        if (config_.abort_on_first_failure) {
          report.aborted = i + 1 < config_.num_tests;
          break;
        }
      }
    }
    return report;
  }

  /// Re-executes a recorded test from its seed and checks every entry and
  /// the verdict. Throws DivergenceError at the first mismatch.
  Trace replay(const Trace& recorded, const efsm::SpecPtr<Env>& root) {
    Trace actual = run_test(root, recorded.test_index, recorded.test_seed);
    const auto& want = recorded.entries;
    const auto& got = actual.entries;
    std::size_t last_step = 0;
    for (std::size_t i = 0; i < std::max(want.size(), got.size()); ++i) {
      if (i < want.size()) {
        if (const auto* s = std::get_if<StepRecord>(&want[i])) last_step = s->step_index;
      }
      const std::string expected = i < want.size() ? to_line(want[i]) : "<end of trace>";
      const std::string observed = i < got.size() ? to_line(got[i]) : "<end of trace>";
      if (expected != observed) throw DivergenceError(last_step, expected, observed);
    }
    if (!(recorded.verdict == actual.verdict)) {
      auto show = [](const Verdict& v) {
        return std::string(v.pass ? "PASS" : "FAIL") + (v.message.empty() ? "" : " " + v.message);
      };
      throw DivergenceError(last_step, show(recorded.verdict), show(actual.verdict));
    }
    return actual;
  }

 private:
  RunConfig config_;
  EnvFactory factory_;
};

}  // namespace netmbt
