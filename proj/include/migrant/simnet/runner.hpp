// Copyright 2026 The Migrant Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "migrant/simnet/assertions.hpp"
#include "migrant/simnet/scenario.hpp"
#include "migrant/simnet/world.hpp"

namespace migrant::simnet {

enum class Outcome { Pass, Fail, HorizonExceeded };
const char* outcome_name(Outcome o) noexcept;

struct AssertionReport {
    std::string name;
    Verdict verdict = Verdict::Pass;
    std::string detail;
    /// For Fail: length of the shortest trace prefix that fails.
    std::size_t prefix = 0;
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    Outcome outcome = Outcome::Pass;
    std::vector<AssertionReport> assertions;
    std::uint64_t trace_hash = 0;
    std::size_t events = 0;
    std::int64_t end_us = 0;
    std::uint64_t published = 0;
    std::uint64_t acked = 0;
    std::uint64_t failed = 0;
    std::uint64_t delivered = 0;
    /// The shortest failing prefix of the first failed assertion.
    std::vector<TraceEvent> minimal_prefix;
    /// The whole trace, when requested.
    std::vector<TraceEvent> trace;
};

struct RunOptions {
    /// Interval at which undecided assertions are re-evaluated after the workload stops.
    rt::Duration check_interval = 250ms;
    bool keep_prefix = true;
    bool keep_trace = false;
    /// Called with the world before the run starts (tests use it to adjust timing).
    std::function<void(WorldConfig&)> configure;
};

/// Runs `scenario` under `seed`: builds the world, schedules the workload and the fault
/// script, runs until every assertion is decided or the horizon passes.
RunReport run_scenario(const Scenario& scenario, std::uint64_t seed, const RunOptions& options = {});

/// Shortest prefix length of `trace` for which `a` fails; `trace.size()` when only the full trace fails.
std::size_t minimal_failing_prefix(const Assertion& a, std::span<const TraceEvent> trace, const AssertionContext& ctx);

}  // namespace migrant::simnet
