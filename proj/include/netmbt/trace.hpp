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

// Line-oriented trace files:
//
//   netmbt-trace v1 seed=<u64> test=<n> backend=<real|sim>
//   # key=value ...                       (optional metadata)
//   launch <instanceId> <model> <state>
//   <stepIndex> <instanceId> <model> <label> <outcome> <resultingState>
//   verdict <PASS|FAIL> [message]
//
// Outcome is "-", an outcome tag, "exc:<ErrorKind>" or "fail".

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "netmbt/errors.hpp"

namespace netmbt {

struct StepRecord {
  std::size_t step_index = 0;
  int instance_id = 0;
  std::string model;
  std::string label;
  std::string outcome = "-";
  std::string state;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct LaunchRecord {
  int instance_id = 0;
  std::string model;
  std::string state;

  friend bool operator==(const LaunchRecord&, const LaunchRecord&) = default;
};

using TraceEntry = std::variant<LaunchRecord, StepRecord>;

struct Verdict {
  bool pass = true;
  std::string message;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct Trace {
  std::uint64_t test_seed = 0;
  std::size_t test_index = 0;
  std::string backend = "sim";
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<TraceEntry> entries;
  Verdict verdict;

  std::size_t step_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += std::holds_alternative<StepRecord>(e);
    return n;
  }

  /// Index of the last step record; a failing verdict refers to it.
  std::optional<std::size_t> last_step_index() const {
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
      if (const auto* s = std::get_if<StepRecord>(&*it)) return s->step_index;
    }
    return std::nullopt;
  }

  std::optional<std::string> meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
};

inline std::string to_line(const TraceEntry& entry) {
  std::ostringstream os;
  if (const auto* l = std::get_if<LaunchRecord>(&entry)) {
    os << "launch " << l->instance_id << ' ' << l->model << ' ' << l->state;
  } else {
    const auto& s = std::get<StepRecord>(entry);
    os << s.step_index << ' ' << s.instance_id << ' ' << s.model << ' '
       << s.label << ' ' << s.outcome << ' ' << s.state;
  }
  return os.str();
}

/// Verdict messages are free text on one line.
inline std::string single_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

inline void write_trace(std::ostream& os, const Trace& trace) {
  os << "netmbt-trace v1 seed=" << trace.test_seed << " test=" << trace.test_index
     << " backend=" << trace.backend << '\n';
  if (!trace.meta.empty()) {
    os << '#';
    for (const auto& [k, v] : trace.meta) os << ' ' << k << '=' << v;
    os << '\n';
  }
  for (const auto& e : trace.entries) os << to_line(e) << '\n';
  os << "verdict " << (trace.verdict.pass ? "PASS" : "FAIL");
  if (!trace.verdict.message.empty()) os << ' ' << single_line(trace.verdict.message);
  os << '\n';
}

namespace detail {

inline std::uint64_t parse_u64(const std::string& text, const std::string& line) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("malformed trace line: " + line);
}

inline std::string header_field(std::istringstream& in, const std::string& key,
                                const std::string& line) {
  std::string token;
  in >> token;
  if (token.rfind(key + "=", 0) != 0) throw ConfigError("malformed trace header: " + line);
  return token.substr(key.size() + 1);
}

}  // namespace detail

/// Parses every trace in a stream (suite files hold one block per test).
inline std::vector<Trace> read_traces(std::istream& is) {
  std::vector<Trace> out;
  std::optional<Trace> current;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("netmbt-trace ", 0) == 0) {
      if (current) throw ConfigError("trace block without verdict before: " + line);
      std::istringstream in(line);
      std::string magic, version;
      in >> magic >> version;
      if (version != "v1") throw ConfigError("unsupported trace version: " + line);
      Trace t;
      t.test_seed = detail::parse_u64(detail::header_field(in, "seed", line), line);
      t.test_index = detail::parse_u64(detail::header_field(in, "test", line), line);
      t.backend = detail::header_field(in, "backend", line);
      if (t.backend != "sim" && t.backend != "real") {
        throw ConfigError("unknown backend in trace header: " + line);
      }
      current = std::move(t);
      continue;
    }
    if (!current) throw ConfigError("trace line outside a block: " + line);
    if (line[0] == '#') {
      std::istringstream in(line.substr(1));
      std::string kv;
      while (in >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed trace metadata: " + line);
        current->meta.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
      }
      continue;
    }
    if (line.rfind("verdict ", 0) == 0) {
      const std::string rest = line.substr(8);
      const auto space = rest.find(' ');
      const std::string word = rest.substr(0, space);
      if (word != "PASS" && word != "FAIL") throw ConfigError("malformed verdict: " + line);
      current->verdict.pass = word == "PASS";
      current->verdict.message = space == std::string::npos ? "" : rest.substr(space + 1);
      out.push_back(std::move(*current));
      current.reset();
      continue;
    }
    std::istringstream in(line);
    std::vector<std::string> fields;
    for (std::string f; in >> f;) fields.push_back(f);
    if (fields.size() == 4 && fields[0] == "launch") {
      LaunchRecord l;
      l.instance_id = static_cast<int>(detail::parse_u64(fields[1], line));
      l.model = fields[2];
      l.state = fields[3];
      current->entries.emplace_back(std::move(l));
    } else if (fields.size() == 6) {
      StepRecord s;
      s.step_index = detail::parse_u64(fields[0], line);
      s.instance_id = static_cast<int>(detail::parse_u64(fields[1], line));
      s.model = fields[2];
      s.label = fields[3];
      s.outcome = fields[4];
      s.state = fields[5];
      current->entries.emplace_back(std::move(s));
    } else {
      throw ConfigError("malformed trace line: " + line);
    }
  }
  if (current) throw ConfigError("truncated trace: missing verdict line");
  return out;
}

}  // namespace netmbt
