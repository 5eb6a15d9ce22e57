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

#include "netmbt/dot.hpp"
#include "netmbt/efsm.hpp"
#include "netmbt/errors.hpp"
#include "netmbt/explorer.hpp"
#include "netmbt/ledger.hpp"
#include "netmbt/models.hpp"
#include "netmbt/portman.hpp"
#include "netmbt/posix_socket.hpp"
#include "netmbt/rng.hpp"
#include "netmbt/simnet.hpp"
#include "netmbt/socket_api.hpp"
#include "netmbt/suite.hpp"
#include "netmbt/trace.hpp"
