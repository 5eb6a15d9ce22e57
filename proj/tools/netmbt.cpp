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

// netmbt command-line tool.
//
//   netmbt run --model server-main [--backend sim|real] [--seed N] ...
//   netmbt replay --replay failures.trace [--test N]
//   netmbt export-dot --model worker
//   netmbt list-models
//
// Exit codes: 0 all tests passed, 1 a test failed (or a replay diverged),
// 2 configuration or backend error.

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "netmbt/netmbt.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kError = 2;

struct RunFlags {
  std::string model;
  std::string backend = "sim";
  std::optional<std::uint64_t> seed;
  std::size_t tests = 100;
  std::size_t max_steps = 100;
  std::string trace_out;
  std::string port_range = "20000:29999";
  std::string fault = "none";
  std::uint64_t fault_step = 0;
  std::string latency = "default";
  bool abort_on_failure = false;
  std::string p_close = "0.1";
  long watchdog_ms = 5000;
};

struct ReplayFlags {
  std::string path;
  std::optional<std::size_t> test;
  std::string port_range = "20000:29999";
  long watchdog_ms = 5000;
};

netmbt::SuiteConfig to_config(const RunFlags& f, std::uint64_t seed) {
  netmbt::SuiteConfig c;
  c.model = f.model;
  c.backend = netmbt::parse_backend(f.backend);
  c.seed = seed;
  c.tests = f.tests;
  c.max_steps = f.max_steps;
  c.abort_on_failure = f.abort_on_failure;
  c.ports = netmbt::parse_port_range(f.port_range);
  if (f.latency != "zero" && f.latency != "default") {
    throw netmbt::ConfigError("--latency must be zero or default");
  }
  c.zero_latency = f.latency == "zero";
  if (f.fault != "none") c.fault = netmbt::parse_fault(f.fault);
  c.fault_trigger = f.fault_step;
  c.params.p_close = netmbt::parse_probability(f.p_close);
  c.watchdog = std::chrono::milliseconds(f.watchdog_ms);
  c.validate();
  return c;
}

void print_report(const netmbt::SuiteReport& r) {
  std::cout << "tests=" << r.tests_run << " passed=" << r.passed << " failed=" << r.failed
            << " steps=" << r.total_steps << (r.aborted ? " aborted" : "") << "\n";
  for (const auto& [name, cov] : r.coverage.models()) {
    std::cout << "coverage " << name << " states=" << cov.states_covered() << "/"
              << cov.states.size() << " transitions=" << cov.transitions_covered() << "/"
              << cov.transitions.size() << "\n";
  }
}

int cmd_run(const RunFlags& f) {
  std::uint64_t seed = 0;
  if (f.seed) {
    seed = *f.seed;
  } else {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  }
  std::cout << "seed=" << seed << std::endl;
  const auto config = to_config(f, seed);

  std::ofstream trace_file;
  if (!f.trace_out.empty()) {
    trace_file.open(f.trace_out, std::ios::binary | std::ios::trunc);
    if (!trace_file) throw netmbt::ConfigError("cannot write " + f.trace_out);
  }
  const auto report = netmbt::run_net_suite(config, trace_file.is_open() ? &trace_file : nullptr);
  print_report(report);

  for (const auto& t : report.failures) {
    std::cout << "FAIL test=" << t.test_index << " step=" << t.last_step_index().value_or(0)
              << ": " << t.verdict.message << "\n";
  }
  if (report.failed > 0) {
    std::string path = f.trace_out;
    if (path.empty()) {
      path = "netmbt-failures-" + std::to_string(seed) + ".trace";
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw netmbt::ConfigError("cannot write " + path);
      for (const auto& t : report.failures) netmbt::write_trace(out, t);
    }
    std::cout << "traces: " << path << "\n";
    return kFail;
  }
  return kPass;
}

int cmd_replay(const ReplayFlags& f) {
  std::ifstream in(f.path, std::ios::binary);
  if (!in) throw netmbt::ConfigError("cannot read " + f.path);
  const auto traces = netmbt::read_traces(in);
  if (traces.empty()) throw netmbt::ConfigError(f.path + " contains no traces");

  const netmbt::Trace* chosen = nullptr;
  for (const auto& t : traces) {
    if (f.test ? t.test_index == *f.test : !t.verdict.pass) {
      chosen = &t;
      break;
    }
  }
  if (!chosen && !f.test) chosen = &traces.front();
  if (!chosen) throw netmbt::ConfigError("no trace for test " + std::to_string(*f.test));

  netmbt::SuiteConfig base;
  base.ports = netmbt::parse_port_range(f.port_range);
  base.watchdog = std::chrono::milliseconds(f.watchdog_ms);
  std::cout << "replaying test=" << chosen->test_index << " seed=" << chosen->test_seed << "\n";
  try {
    const auto actual = netmbt::replay_net(*chosen, base);
    const auto step = actual.last_step_index();
    if (actual.verdict.pass) {
      std::cout << "reproduced PASS after " << actual.step_count() << " steps\n";
      return kPass;
    }
    std::cout << "reproduced FAIL at step " << step.value_or(0) << ": " << actual.verdict.message
              << "\n";
    return kFail;
  } catch (const netmbt::DivergenceError& e) {
    std::cout << "DIVERGENCE at step " << e.step_index() << "\n  expected: " << e.expected()
              << "\n  actual:   " << e.actual() << "\n";
    return kFail;
  }
}

int cmd_export_dot(const std::string& model) {
  const auto& reg = netmbt::model_registry();
  const auto it = reg.find(model);
  if (it == reg.end()) throw netmbt::ConfigError("unknown model '" + model + "'");
  std::cout << netmbt::export_dot(*it->second.factory());
  return kPass;
}

int cmd_list_models() {
  for (const auto& [name, entry] : netmbt::model_registry()) {
    std::cout << name << (entry.runnable ? "" : " (launched only)") << "  " << entry.summary << "\n";
  }
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based tests for a socket API"};
  app.require_subcommand(1);

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "run a test suite");
  run_cmd->add_option("--model", run.model, "root model")->required();
  run_cmd->add_option("--backend", run.backend, "sim or real")->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "suite seed (random when omitted)");
  run_cmd->add_option("--tests", run.tests, "number of tests")->capture_default_str();
  run_cmd->add_option("--max-steps", run.max_steps, "step budget per test")->capture_default_str();
  run_cmd->add_option("--trace-out", run.trace_out, "write every trace to this file");
  run_cmd->add_option("--port-range", run.port_range, "listen ports for the real backend, lo:hi")
      ->capture_default_str();
  run_cmd->add_option("--fault", run.fault,
                      "none, duplicate-bytes, drop-bytes or phantom-readiness (sim only)")
      ->capture_default_str();
  run_cmd->add_option("--fault-step", run.fault_step, "earliest simulated step for the fault")
      ->capture_default_str();
  run_cmd->add_option("--latency", run.latency, "zero or default (sim only)")->capture_default_str();
  run_cmd->add_flag("--abort-on-failure", run.abort_on_failure, "stop at the first failing test");
  run_cmd->add_option("--p-close", run.p_close, "client close probability, decimal or a/b")
      ->capture_default_str();
  run_cmd->add_option("--watchdog-ms", run.watchdog_ms, "per-step wall-clock bound")
      ->capture_default_str();

  ReplayFlags replay;
  auto* replay_cmd = app.add_subcommand("replay", "re-execute a recorded test");
  replay_cmd->add_option("--replay,trace", replay.path, "trace file")->required();
  replay_cmd->add_option("--test", replay.test, "test index (default: first failing trace)");
  replay_cmd->add_option("--port-range", replay.port_range, "listen ports for the real backend")
      ->capture_default_str();
  replay_cmd->add_option("--watchdog-ms", replay.watchdog_ms, "per-step wall-clock bound")
      ->capture_default_str();

  std::string dot_model;
  auto* dot_cmd = app.add_subcommand("export-dot", "print a model as a DOT graph");
  dot_cmd->add_option("--model", dot_model, "model name")->required();

  auto* list_cmd = app.add_subcommand("list-models", "list registered models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "netmbt: " << e.what() << "\n";
    return kError;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run);
    if (replay_cmd->parsed()) return cmd_replay(replay);
    if (dot_cmd->parsed()) return cmd_export_dot(dot_model);
    if (list_cmd->parsed()) return cmd_list_models();
  } catch (const netmbt::ConfigError& e) {
    std::cerr << "netmbt: " << e.what() << "\n";
    return kError;
  } catch (const netmbt::BackendError& e) {
    std::cerr << "netmbt: backend error: " << e.what() << "\n";
    return kError;
  } catch (const netmbt::SpecError& e) {
    std::cerr << "netmbt: model error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
