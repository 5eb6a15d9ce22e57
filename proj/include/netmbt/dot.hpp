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

#include <sstream>
#include <string>

#include "netmbt/efsm.hpp"

namespace netmbt {

namespace detail {

inline std::string dot_quote(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

/// Graphviz rendering of a model. Solid edges are transitions, red edges are
/// exception overrides, dashed edges are non-deterministic outcomes. Output
/// follows declaration order.
template <typename Env>
std::string export_dot(const efsm::ModelSpec<Env>& spec) {
  using detail::dot_quote;
  std::ostringstream os;
  os << "digraph " << dot_quote(spec.name) << " {\n";
  for (const auto& s : spec.states) {
    os << "  " << dot_quote(s);
    if (s == spec.initial) os << " [shape=doublecircle]";
    os << ";\n";
  }
  for (const auto& t : spec.transitions) {
    const std::string from = "  " + dot_quote(t.source) + " -> ";
    if (t.outcome_branches.empty() && !t.expects_error) {
      os << from << dot_quote(t.target) << " [label=" << dot_quote(t.label) << "];\n";
    }
    for (const auto& [tag, to] : t.outcome_branches) {
      os << from << dot_quote(to) << " [label=" << dot_quote(t.label + ":" + tag)
         << ", style=dashed];\n";
    }
    for (const auto& [kind, to] : t.exception_overrides) {
      os << from << dot_quote(to) << " [label="
         << dot_quote(t.label + ":" + std::string(to_string(kind)))
         << ", color=red];\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace netmbt
