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

// Extended finite-state machine models: states, guarded transitions with
// actions, exception overrides, non-deterministic outcomes and child-model
// launches, plus single-step execution.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "netmbt/errors.hpp"
#include "netmbt/handles.hpp"
#include "netmbt/rng.hpp"

namespace netmbt::efsm {

using StateId = std::string;
using OutcomeTag = std::string;

using Value = std::variant<std::monostate, bool, std::int64_t, double,
                           std::string, ServerId, ConnId, SelectorId,
                           SelectorKey>;

/// Instance-local variables: a string-keyed store of scalars and handles.
class Vars {
 public:
  Vars() = default;
  Vars(std::initializer_list<std::pair<const std::string, Value>> init)
      : values_(init) {}

  bool contains(const std::string& key) const {
    return values_.count(key) != 0;
  }

  template <typename T>
  const T& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw PropertyViolation("model variable '" + key + "' is not set");
    }
    if (const T* value = std::get_if<T>(&it->second)) return *value;
    throw PropertyViolation("model variable '" + key + "' has another type");
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const T* value = std::get_if<T>(&it->second)) return *value;
    return fallback;
  }

  void set(const std::string& key, Value value) {
    values_[key] = std::move(value);
  }

  std::int64_t increment(const std::string& key, std::int64_t by = 1) {
    const std::int64_t next = get_or<std::int64_t>(key, 0) + by;
    values_[key] = next;
    return next;
  }

  void erase(const std::string& key) { values_.erase(key); }

  friend bool operator==(const Vars&, const Vars&) = default;

 private:
  std::map<std::string, Value> values_;
};

template <typename Env>
class ActionContext;

template <typename Env>
using Action = std::function<void(ActionContext<Env>&)>;

/// Pure predicate over instance variables.
using Guard = std::function<bool(const Vars&)>;

template <typename Env>
struct Transition {
  StateId source;
  StateId target;
  std::string label;
  Guard guard;
  Action<Env> action;
  double weight = 1.0;
  std::map<ErrorKind, StateId> exception_overrides;
  std::map<OutcomeTag, StateId> outcome_branches;
  // When set, completing without raising one of the overridden kinds is a
  // property violation (the operation is disallowed in `source`).
  bool expects_error = false;

  static Transition edge(StateId from, StateId to, std::string label,
                         Action<Env> action = {}) {
    Transition t;
    t.source = std::move(from);
    t.target = std::move(to);
    t.label = std::move(label);
    t.action = std::move(action);
    return t;
  }

  static Transition self(const StateId& state, std::string label,
                         Action<Env> action = {}) {
    return edge(state, state, std::move(label), std::move(action));
  }

  Transition& when(Guard g) & { guard = std::move(g); return *this; }
  Transition&& when(Guard g) && { guard = std::move(g); return std::move(*this); }

  Transition& with_weight(double w) & { weight = w; return *this; }
  Transition&& with_weight(double w) && { weight = w; return std::move(*this); }

  Transition& on_error(ErrorKind kind, StateId to) & {
    exception_overrides[kind] = std::move(to);
    return *this;
  }
  Transition&& on_error(ErrorKind kind, StateId to) && {
    exception_overrides[kind] = std::move(to);
    return std::move(*this);
  }

  /// Red transition: the action must raise `kind`, which leads to `to`.
  Transition&& expect_error(ErrorKind kind, StateId to) && {
    exception_overrides[kind] = std::move(to);
    expects_error = true;
    return std::move(*this);
  }

  Transition&& branch(OutcomeTag tag, StateId to) && {
    outcome_branches[std::move(tag)] = std::move(to);
    return std::move(*this);
  }
};

template <typename Env>
struct ModelSpec {
  std::string name;
  StateId initial;
  std::vector<StateId> states;
  std::vector<Transition<Env>> transitions;
  Action<Env> constructor;
  std::map<ErrorKind, StateId> constructor_overrides;

  bool has_state(const StateId& s) const {
    return std::find(states.begin(), states.end(), s) != states.end();
  }

  std::span<const std::size_t> outgoing(const StateId& s) const {
    auto it = outgoing_.find(s);
    if (it == outgoing_.end()) return {};
    return it->second;
  }

  std::string transition_key(const Transition<Env>& t) const {
    return t.source + "/" + t.label;
  }

  // Filled by define_model.
  std::map<StateId, std::vector<std::size_t>> outgoing_;
};

template <typename Env>
using SpecPtr = std::shared_ptr<const ModelSpec<Env>>;

namespace detail {

inline bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](unsigned char c) {
    return c <= ' ' || c == '"' || c == 0x7f;
  });
}

}  // namespace detail

/// Validates and freezes a model. States, labels and tags must be non-empty
/// tokens without whitespace so traces stay space-separated.
template <typename Env>
SpecPtr<Env> define_model(std::string name, StateId initial,
                          std::vector<StateId> states,
                          std::vector<Transition<Env>> transitions,
                          Action<Env> constructor = {},
                          std::map<ErrorKind, StateId> constructor_overrides = {}) {
  auto spec = std::make_shared<ModelSpec<Env>>();
  spec->name = std::move(name);
  spec->initial = std::move(initial);
  spec->states = std::move(states);
  spec->transitions = std::move(transitions);
  spec->constructor = std::move(constructor);
  spec->constructor_overrides = std::move(constructor_overrides);

  const std::string where = "model '" + spec->name + "': ";
  if (!detail::valid_token(spec->name)) {
    throw SpecError("invalid model name '" + spec->name + "'");
  }
  std::set<StateId> declared;
  for (const auto& s : spec->states) {
    if (!detail::valid_token(s)) throw SpecError(where + "invalid state name '" + s + "'");
    if (!declared.insert(s).second) throw SpecError(where + "duplicate state '" + s + "'");
  }
  auto check_state = [&](const StateId& s, const std::string& role) {
    if (!declared.count(s)) {
      throw SpecError(where + "dangling state reference '" + s + "' (" + role + ")");
    }
  };
  check_state(spec->initial, "initial");
  for (const auto& [kind, s] : spec->constructor_overrides) {
    check_state(s, "constructor override");
  }

  std::set<std::pair<StateId, std::string>> labels;
  for (std::size_t i = 0; i < spec->transitions.size(); ++i) {
    const auto& t = spec->transitions[i];
    if (!detail::valid_token(t.label)) {
      throw SpecError(where + "invalid transition label '" + t.label + "'");
    }
    const std::string role = t.source + "/" + t.label;
    check_state(t.source, role + " source");
    check_state(t.target, role + " target");
    if (!(t.weight > 0.0)) throw SpecError(where + "non-positive weight on " + role);
    if (!labels.emplace(t.source, t.label).second) {
      throw SpecError(where + "duplicate (source, label) " + role);
    }
    for (const auto& [kind, s] : t.exception_overrides) check_state(s, role + " override");
    for (const auto& [tag, s] : t.outcome_branches) {
      if (!detail::valid_token(tag)) throw SpecError(where + "invalid outcome tag on " + role);
      check_state(s, role + " branch");
    }
    if (t.expects_error && t.exception_overrides.empty()) {
      throw SpecError(where + role + " expects an error but maps none");
    }
    spec->outgoing_[t.source].push_back(i);
  }
  return spec;
}

template <typename Env>
struct ModelInstance {
  int id = 0;
  SpecPtr<Env> spec;
  StateId current;
  Vars vars;
  bool terminated = false;

  bool alive() const {
    return !terminated && !spec->outgoing(current).empty();
  }
};

/// Transitions leaving the current state whose guard holds, in declaration
/// order. A guard that throws is a property violation.
template <typename Env>
std::vector<const Transition<Env>*> enabled_transitions(
    const ModelInstance<Env>& inst) {
  std::vector<const Transition<Env>*> out;
  if (!inst.alive()) return out;
  for (std::size_t index : inst.spec->outgoing(inst.current)) {
    const auto& t = inst.spec->transitions[index];
    bool enabled = true;
    if (t.guard) {
      try {
        enabled = t.guard(inst.vars);
      } catch (const std::exception& e) {
        throw PropertyViolation("guard of " + inst.spec->name + "." + t.label +
                                " failed: " + e.what());
      }
    }
    if (enabled) out.push_back(&t);
  }
  return out;
}

struct StepOutcome {
  enum class Kind { Completed, PropertyViolation };

  Kind kind = Kind::Completed;
  StateId target;
  std::string message;
  std::optional<ErrorKind> raised_error;
  std::optional<OutcomeTag> outcome_tag;
  std::vector<int> launched;

  bool violated() const { return kind == Kind::PropertyViolation; }
};

template <typename Env>
class InstancePool;

/// What an action sees while it runs.
template <typename Env>
class ActionContext {
 public:
  ActionContext(InstancePool<Env>& pool, ModelInstance<Env>& self,
                SeededRng& rng)
      : pool_(pool), self_(self), rng_(rng) {}

  Env& env() { return pool_.env(); }
  Vars& vars() { return self_.vars; }
  SeededRng& rng() { return rng_; }
  int instance_id() const { return self_.id; }
  const StateId& state() const { return self_.current; }

  /// Reports the non-deterministic outcome of this action.
  void emit(OutcomeTag tag) { tag_ = std::move(tag); }

  /// Instantiates a child model now: its constructor has run when this
  /// returns. The child joins the schedule after the current step.
  int launch(const SpecPtr<Env>& child, Vars args = {}) {
    const int id = pool_.launch(child, std::move(args), rng_);
    launched_.push_back(id);
    return id;
  }

  void terminate() { terminate_ = true; }

  const std::optional<OutcomeTag>& tag() const { return tag_; }
  const std::vector<int>& launched() const { return launched_; }
  bool terminate_requested() const { return terminate_; }

 private:
  InstancePool<Env>& pool_;
  ModelInstance<Env>& self_;
  SeededRng& rng_;
  std::optional<OutcomeTag> tag_;
  std::vector<int> launched_;
  bool terminate_ = false;
};

struct LaunchEvent {
  int instance_id;
  std::string model;
  StateId state;
};

/// The live model instances of one test. Owns instance numbering, runs
/// constructors and fires transitions.
template <typename Env>
class InstancePool {
 public:
  explicit InstancePool(Env& env) : env_(env) {}

  Env& env() { return env_; }

  /// Runs the constructor to completion and adds the instance to the
  /// schedule. Throws PropertyViolation when the constructor raises an
  /// unmapped error.
  ModelInstance<Env>& instantiate(const SpecPtr<Env>& spec, Vars args,
                                  SeededRng& rng) {
    const int id = launch(spec, std::move(args), rng);
    adopt_launches();
    return *find(id);
  }

  std::vector<const Transition<Env>*> enabled_transitions(
      const ModelInstance<Env>& inst) const {
    return efsm::enabled_transitions(inst);
  }

  /// Executes `t` once on `inst`. Watchdog expiry propagates to the caller;
  /// every other failure becomes a PropertyViolation outcome.
  StepOutcome fire(ModelInstance<Env>& inst, const Transition<Env>& t,
                   SeededRng& rng) {
    StepOutcome out;
    out.target = inst.current;
    ActionContext<Env> ctx(*this, inst, rng);
    auto violate = [&](std::string message) {
      out.kind = StepOutcome::Kind::PropertyViolation;
      out.message = std::move(message);
      out.launched = ctx.launched();
      return out;
    };
    const std::string where = inst.spec->name + "." + t.label;
    try {
      if (t.action) t.action(ctx);
    } catch (const SutError& e) {
      out.raised_error = e.kind();
      out.launched = ctx.launched();
      auto it = t.exception_overrides.find(e.kind());
      if (it == t.exception_overrides.end()) {
        return violate("unexpected exception in " + where + ": " + e.what());
      }
      out.target = it->second;
      inst.current = out.target;
      return out;
    } catch (const PropertyViolation& e) {
      return violate(std::string(e.what()));
    } catch (const WatchdogExpired&) {
      throw;
    } catch (const std::exception& e) {
      return violate("unexpected exception in " + where + ": " + e.what());
    }
    out.launched = ctx.launched();
    if (t.expects_error) {
      std::string kinds;
      for (const auto& [kind, s] : t.exception_overrides) {
        if (!kinds.empty()) kinds += "|";
        kinds += to_string(kind);
      }
      return violate("expected exception " + kinds + " not raised in " + where);
    }
    if (ctx.tag()) {
      out.outcome_tag = ctx.tag();
      auto it = t.outcome_branches.find(*ctx.tag());
      if (it == t.outcome_branches.end()) {
        return violate("undeclared outcome '" + *ctx.tag() + "' in " + where);
      }
      out.target = it->second;
    } else if (!t.outcome_branches.empty()) {
      return violate("no outcome reported by " + where);
    } else {
      out.target = t.target;
    }
    inst.current = out.target;
    if (ctx.terminate_requested()) inst.terminated = true;
    return out;
  }

  /// Live instances in creation order.
  std::vector<ModelInstance<Env>*> live() {
    std::vector<ModelInstance<Env>*> out;
    for (auto& inst : instances_) {
      if (inst->alive()) out.push_back(inst.get());
    }
    return out;
  }

  ModelInstance<Env>* find(int id) {
    for (auto& inst : instances_) {
      if (inst->id == id) return inst.get();
    }
    for (auto& inst : pending_) {
      if (inst->id == id) return inst.get();
    }
    return nullptr;
  }

  /// Moves instances launched during the last step into the schedule.
  void adopt_launches() {
    for (auto& inst : pending_) instances_.push_back(std::move(inst));
    pending_.clear();
  }

  /// Launch events since the last call, in constructor order.
  std::vector<LaunchEvent> take_launch_events() {
    return std::exchange(events_, {});
  }

  std::size_t size() const { return instances_.size() + pending_.size(); }

  /// Every model instantiated in this pool, by name.
  const std::map<std::string, SpecPtr<Env>>& specs() const { return specs_; }

 private:
  friend class ActionContext<Env>;

  int launch(const SpecPtr<Env>& spec, Vars args, SeededRng& rng) {
    auto inst = std::make_unique<ModelInstance<Env>>();
    inst->id = ++last_id_;
    inst->spec = spec;
    inst->current = spec->initial;
    inst->vars = std::move(args);
    if (spec->constructor) {
      ActionContext<Env> ctx(*this, *inst, rng);
      try {
        spec->constructor(ctx);
      } catch (const SutError& e) {
        auto it = spec->constructor_overrides.find(e.kind());
        if (it == spec->constructor_overrides.end()) {
          throw PropertyViolation("constructor of " + spec->name +
                                  " failed: " + e.what());
        }
        inst->current = it->second;
      } catch (const PropertyViolation&) {
        throw;
      } catch (const WatchdogExpired&) {
        throw;
      } catch (const std::exception& e) {
        throw PropertyViolation("constructor of " + spec->name +
                                " failed: " + e.what());
      }
      if (ctx.terminate_requested()) inst->terminated = true;
    }
    const int id = inst->id;
    specs_.emplace(spec->name, spec);
    events_.push_back({id, spec->name, inst->current});
    pending_.push_back(std::move(inst));
    return id;
  }

  Env& env_;
  int last_id_ = 0;
  std::vector<std::unique_ptr<ModelInstance<Env>>> instances_;
  std::vector<std::unique_ptr<ModelInstance<Env>>> pending_;
  std::vector<LaunchEvent> events_;
  std::map<std::string, SpecPtr<Env>> specs_;
};

}  // namespace netmbt::efsm
