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

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "netmbt/errors.hpp"
#include "netmbt/handles.hpp"

namespace netmbt {

struct PortRange {
  Port lo = 20000;
  Port hi = 29999;

  std::size_t size() const { return lo <= hi ? static_cast<std::size_t>(hi - lo) + 1 : 0; }
  bool contains(Port p) const { return p >= lo && p <= hi; }
};

/// Listen ports for the real backend. A released port rests for a number of
/// tests before it can be leased again, which keeps a suite clear of ports
/// still lingering in TIME_WAIT.
class PortPool {
 public:
  explicit PortPool(PortRange range, std::size_t cooldown_tests = 2)
      : range_(range), cooldown_(cooldown_tests) {
    if (range.size() == 0) throw ConfigError("port range is empty");
    for (std::uint32_t p = range.lo; p <= range.hi; ++p) free_.insert(static_cast<Port>(p));
  }

  /// Leases the lowest free port.
  Port acquire() {
    recycle();
    if (free_.empty()) {
      throw PoolExhaustedError("no free listen port in " + std::to_string(range_.lo) + ":" +
                               std::to_string(range_.hi) + " (" + std::to_string(leased_.size()) +
                               " leased, " + std::to_string(cooldown_map_.size()) +
                               " cooling down); widen --port-range or run fewer connections per test");
    }
    const Port p = *free_.begin();
    free_.erase(free_.begin());
    leased_.insert(p);
    return p;
  }

  void release(Port p) {
    if (!leased_.erase(p)) throw std::logic_error("release of a port that is not leased");
    cooldown_map_[p] = test_;
  }

  /// Marks the end of a test; cooldowns are measured in these.
  void next_test() { ++test_; }

  std::size_t free_count() const { return free_.size(); }
  std::size_t leased_count() const { return leased_.size(); }
  std::size_t cooling_count() const { return cooldown_map_.size(); }
  const PortRange& range() const { return range_; }

 private:
  void recycle() {
    for (auto it = cooldown_map_.begin(); it != cooldown_map_.end();) {
      if (test_ - it->second >= cooldown_) {
        free_.insert(it->first);
        it = cooldown_map_.erase(it);
      } else {
        ++it;
      }
    }
  }

  PortRange range_;
  std::size_t cooldown_;
  std::size_t test_ = 0;
  std::set<Port> free_;
  std::set<Port> leased_;
  std::map<Port, std::size_t> cooldown_map_;  // port -> test index at release
};

}  // namespace netmbt
