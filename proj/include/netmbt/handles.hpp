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

#include <compare>
#include <cstdint>
#include <ostream>

namespace netmbt {

using Port = std::uint16_t;

namespace detail {

template <typename Tag>
struct Handle {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(const Handle&, const Handle&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Handle& h) {
    return os << Tag::prefix << h.value;
  }
};

struct ServerTag { static constexpr const char* prefix = "server#"; };
struct ConnTag { static constexpr const char* prefix = "conn#"; };
struct SelectorTag { static constexpr const char* prefix = "selector#"; };
struct KeyTag { static constexpr const char* prefix = "key#"; };

}  // namespace detail

/// Opaque references into a socket backend. Only meaningful for the backend
/// that issued them.
using ServerId = detail::Handle<detail::ServerTag>;
using ConnId = detail::Handle<detail::ConnTag>;
using SelectorId = detail::Handle<detail::SelectorTag>;
using SelectorKey = detail::Handle<detail::KeyTag>;

}  // namespace netmbt
