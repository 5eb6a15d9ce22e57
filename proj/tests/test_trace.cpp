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

#include <sstream>

#include "netmbt/trace.hpp"

using netmbt::LaunchRecord;
using netmbt::StepRecord;
using netmbt::Trace;

namespace {

Trace sample() {
  Trace t;
  t.test_seed = 18446744073709551615ULL;
  t.test_index = 3;
  t.backend = "real";
  t.meta = {{"model", "server-main"}, {"p-close", "0.1"}};
  t.entries.emplace_back(LaunchRecord{1, "server-main", "bound"});
  t.entries.emplace_back(StepRecord{0, 1, "server-main", "launchClient", "-", "bound"});
  t.entries.emplace_back(LaunchRecord{2, "client", "open"});
  t.entries.emplace_back(StepRecord{1, 2, "client", "read", "exc:ConnectionReset", "reset"});
  t.verdict = {false, "client read exceeds ledger"};
  return t;
}

}  // namespace

TEST(Trace, Format) {
  std::ostringstream os;
  netmbt::write_trace(os, sample());
  EXPECT_EQ(os.str(),
            "netmbt-trace v1 seed=18446744073709551615 test=3 backend=real\n"
            "# model=server-main p-close=0.1\n"
            "launch 1 server-main bound\n"
            "0 1 server-main launchClient - bound\n"
            "launch 2 client open\n"
            "1 2 client read exc:ConnectionReset reset\n"
            "verdict FAIL client read exceeds ledger\n");
}

TEST(Trace, RoundTripMultipleBlocks) {
  std::ostringstream os;
  auto a = sample();
  auto b = sample();
  b.test_index = 4;
  b.meta.clear();
  b.verdict = {true, ""};
  netmbt::write_trace(os, a);
  netmbt::write_trace(os, b);
  std::istringstream is(os.str());
  const auto back = netmbt::read_traces(is);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].entries, a.entries);
  EXPECT_EQ(back[0].meta, a.meta);
  EXPECT_EQ(back[0].verdict, a.verdict);
  EXPECT_EQ(back[0].test_seed, a.test_seed);
  EXPECT_EQ(back[1].test_index, 4u);
  EXPECT_TRUE(back[1].verdict.pass);
  EXPECT_EQ(back[0].meta_value("p-close"), "0.1");
  EXPECT_EQ(back[0].last_step_index(), 1u);
  EXPECT_EQ(back[0].step_count(), 2u);
}

TEST(Trace, MessagesAreFlattened) {
  auto t = sample();
  t.verdict.message = "two\nlines";
  std::ostringstream os;
  netmbt::write_trace(os, t);
  std::istringstream is(os.str());
  EXPECT_EQ(netmbt::read_traces(is).at(0).verdict.message, "two lines");
}

TEST(Trace, MalformedInputIsRejected) {
  for (const char* text : {
           "netmbt-trace v2 seed=1 test=0 backend=sim\nverdict PASS\n",
           "netmbt-trace v1 seed=x test=0 backend=sim\nverdict PASS\n",
           "netmbt-trace v1 seed=1 test=0 backend=tcp\nverdict PASS\n",
           "netmbt-trace v1 seed=1 test=0 backend=sim\n0 1 m a\nverdict PASS\n",
           "netmbt-trace v1 seed=1 test=0 backend=sim\nverdict MAYBE\n",
           "netmbt-trace v1 seed=1 test=0 backend=sim\n0 1 m a - s\n",
           "0 1 m a - s\n",
       }) {
    std::istringstream is(text);
    EXPECT_THROW(netmbt::read_traces(is), netmbt::ConfigError) << text;
  }
}
