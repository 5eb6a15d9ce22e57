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

#include "netmbt/ledger.hpp"

using netmbt::OracleLedger;
using netmbt::PropertyViolation;
using netmbt::ReadResult;
using netmbt::Side;

namespace {

ReadResult bytes(std::size_t n) { return ReadResult{false, std::vector<std::byte>(n)}; }

// client instance 2, worker instance 3
std::size_t connection(OracleLedger& l) {
  const auto id = l.open(50000, 40000, 2);
  EXPECT_EQ(l.attach_server(50000, 3), id);
  return id;
}

}  // namespace

TEST(Ledger, UnderReadsPassOverReadsFail) {
  OracleLedger l;
  const auto id = connection(l);
  l.record_write(id, Side::Client, 2, 10);
  l.check_read(id, Side::Server, 3, bytes(4));
  l.check_read(id, Side::Server, 3, bytes(6));
  EXPECT_EQ(l.at(id).at(Side::Server).read, 10u);
  try {
    l.check_read(id, Side::Server, 3, bytes(1));
    FAIL() << "over-read accepted";
  } catch (const PropertyViolation& e) {
    EXPECT_NE(std::string(e.what()).find("read exceeds ledger"), std::string::npos);
  }
}

TEST(Ledger, CumulativeClientReadsBoundedByWorkerWrites) {
  OracleLedger l;
  const auto id = connection(l);
  l.record_write(id, Side::Server, 3, 10);
  l.check_read(id, Side::Client, 2, bytes(7));
  EXPECT_THROW(l.check_read(id, Side::Client, 2, bytes(4)), PropertyViolation);
}

TEST(Ledger, EndOfStreamNeedsPeerShutdown) {
  OracleLedger l;
  const auto id = connection(l);
  EXPECT_THROW(l.check_read(id, Side::Client, 2, ReadResult::eos()), PropertyViolation);
  l.output_shut(id, Side::Server, 3);
  l.check_read(id, Side::Client, 2, ReadResult::eos());
}

TEST(Ledger, StrictEndOfStreamNeedsEveryByte) {
  OracleLedger l(true);
  const auto id = connection(l);
  l.record_write(id, Side::Server, 3, 5);
  l.closed(id, Side::Server, 3);
  EXPECT_THROW(l.check_read(id, Side::Client, 2, ReadResult::eos()), PropertyViolation);
  l.check_read(id, Side::Client, 2, bytes(5));
  l.check_read(id, Side::Client, 2, ReadResult::eos());
}

TEST(Ledger, ResetOnlyAfterPeerLeft) {
  OracleLedger l;
  const auto id = connection(l);
  EXPECT_THROW(l.check_reset(id, Side::Client, 2), PropertyViolation);
  l.input_shut(id, Side::Server, 3);
  EXPECT_THROW(l.check_reset(id, Side::Client, 2), PropertyViolation);
  l.output_shut(id, Side::Server, 3);
  l.check_reset(id, Side::Client, 2);  // fully shut peer
  l.closed(id, Side::Client, 2);
  l.check_reset(id, Side::Server, 3);
}

TEST(Ledger, ReadinessSoundness) {
  OracleLedger l;
  const auto id = connection(l);
  EXPECT_THROW(l.check_read_ready(id, Side::Server, 3), PropertyViolation);
  l.record_write(id, Side::Client, 2, 1);
  l.check_read_ready(id, Side::Server, 3);
}

TEST(Ledger, OwnershipIsEnforced) {
  OracleLedger l;
  const auto id = connection(l);
  EXPECT_THROW(l.record_write(id, Side::Client, 3, 1), PropertyViolation);
  EXPECT_THROW(l.record_write(id, Side::Server, 2, 1), PropertyViolation);
  EXPECT_THROW(l.record_write(99, Side::Server, 3, 1), PropertyViolation);
}

TEST(Ledger, AttachNeedsAnInitiatingClient) {
  OracleLedger l;
  EXPECT_THROW(l.attach_server(50000, 3), PropertyViolation);
  l.open(50000, 40000, 2);
  l.listener_closed(40000);
  EXPECT_THROW(l.attach_server(50000, 3), PropertyViolation);
}

TEST(Ledger, ListenerCloseCountsAsPeerClose) {
  OracleLedger l;
  const auto id = l.open(50001, 40000, 2);
  l.listener_closed(40000);
  l.check_reset(id, Side::Client, 2);
  l.check_read(id, Side::Client, 2, ReadResult::eos());
}

TEST(Ledger, ResetClears) {
  OracleLedger l;
  connection(l);
  EXPECT_FALSE(l.empty());
  l.reset();
  EXPECT_TRUE(l.empty());
}
