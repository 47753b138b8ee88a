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
#include <random>

#include "migrant/runtime/executor.hpp"

namespace migrant::client {

using namespace std::chrono_literals;

struct ReconnectPolicy {
    enum class Mode { RandomWait, TruncatedExpBackoff };

    Mode mode = Mode::TruncatedExpBackoff;
    rt::Duration min_wait = 0ms;  // RandomWait
    rt::Duration max_wait = 1s;   // RandomWait
    rt::Duration base = 500ms;    // TruncatedExpBackoff
    rt::Duration cap = 8s;        // TruncatedExpBackoff
    bool jitter = true;

    /// Delay before reconnection attempt `attempt` (1-based), before jitter.
    /// Backoff: min(cap, base * 2^(attempt-1)). RandomWait: the midpoint of [min_wait, max_wait].
    rt::Duration nominal(std::uint32_t attempt) const;

    /// Backoff: nominal scaled by a factor uniform in [0.5, 1.5] when jitter is on.
    /// RandomWait: uniform in [min_wait, max_wait].
    rt::Duration delay(std::uint32_t attempt, std::mt19937_64& rng) const;
};

}  // namespace migrant::client
