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

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "migrant/simnet/trace.hpp"

namespace migrant::simnet {

using namespace std::chrono_literals;

enum class Verdict { Pass, Fail, Undecided };
const char* verdict_name(Verdict v) noexcept;

struct Check {
    Verdict verdict = Verdict::Pass;
    std::string detail;
};

using CacheSnapshot = std::map<TopicName, std::vector<OrderKey>>;

struct AssertionContext {
    std::size_t servers = 3;
    std::size_t cache_depth = 1000;
    /// A server cut off from both peers must fence within this long.
    rt::Duration fence_bound = 7s;
    /// Fencing is still allowed this long after the partition heals.
    rt::Duration fence_grace = 2s;
    /// Virtual time of the evaluation.
    std::int64_t now_us = 0;
    /// Final cache contents of live servers (nullopt for crashed ones), when known.
    const std::vector<std::optional<CacheSnapshot>>* caches = nullptr;
};

/// A named predicate over the event trace (and, for some, the final server state).
class Assertion {
public:
    virtual ~Assertion() = default;
    virtual const char* name() const noexcept = 0;
    /// Fail verdicts are monotone in the trace prefix, so the shortest failing
    /// prefix can be found by bisection.
    virtual Check evaluate(std::span<const TraceEvent> trace, const AssertionContext& ctx) const = 0;
};

/// total_order, at_least_once, coordinator_uniqueness, epoch_monotonic, two_copy,
/// fencing, cache_equality.
std::unique_ptr<Assertion> make_assertion(const std::string& name);
bool known_assertion(const std::string& name);
const std::vector<std::string>& assertion_names();

}  // namespace migrant::simnet
