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

#include "netmbt/portman.hpp"

using netmbt::PortPool;
using netmbt::PortRange;

TEST(PortPool, LeasesLowestAndExhausts) {
  PortPool pool(PortRange{20000, 20003});
  for (netmbt::Port p = 20000; p <= 20003; ++p) EXPECT_EQ(pool.acquire(), p);
  try {
    pool.acquire();
    FAIL() << "fifth lease succeeded";
  } catch (const netmbt::PoolExhaustedError& e) {
    EXPECT_NE(std::string(e.what()).find("--port-range"), std::string::npos);
  }
}

TEST(PortPool, ReleasedPortReturnsAfterCooldown) {
  PortPool pool(PortRange{20000, 20000}, 2);
  const auto p = pool.acquire();
  pool.release(p);
  EXPECT_EQ(pool.cooling_count(), 1u);
  EXPECT_THROW(pool.acquire(), netmbt::PoolExhaustedError);
  pool.next_test();
  EXPECT_THROW(pool.acquire(), netmbt::PoolExhaustedError);
  pool.next_test();
  EXPECT_EQ(pool.acquire(), p);
}

TEST(PortPool, ZeroCooldownReusesImmediately) {
  PortPool pool(PortRange{20000, 20001}, 0);
  const auto p = pool.acquire();
  pool.release(p);
  EXPECT_EQ(pool.acquire(), p);
}

TEST(PortPool, MisuseIsRejected) {
  EXPECT_THROW(PortPool(PortRange{20001, 20000}), netmbt::ConfigError);
  PortPool pool(PortRange{20000, 20001});
  EXPECT_THROW(pool.release(20000), std::logic_error);
}

// One listen port per test and a cooldown of two tests: a long run never
// needs more than three ports at a time.
TEST(PortPool, LongRunNeverExhausts) {
  PortPool pool(PortRange{20000, 20999});
  for (int test = 0; test < 10000; ++test) {
    const auto p = pool.acquire();
    ASSERT_LE(pool.leased_count() + pool.cooling_count(), 3u);
    pool.release(p);
    pool.next_test();
  }
  EXPECT_GE(pool.free_count(), 997u);
}
