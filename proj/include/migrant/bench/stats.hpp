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
#include <optional>
#include <span>
#include <vector>

namespace migrant::bench {

/// Latency summary in milliseconds. Every field is empty when there are no samples.
struct LatencyStats {
    std::uint64_t count = 0;
    std::optional<double> median;
    std::optional<double> mean;
    std::optional<double> stdev;  // population
    std::optional<double> p90;
    std::optional<double> p95;
    std::optional<double> p99;
};

/// Nearest-rank percentile of a sorted, non-empty sample: the ceil(p/100 * n)-th smallest.
double nearest_rank(std::span<const double> sorted, double p);

LatencyStats compute_stats(std::vector<double> samples_ms);

}  // namespace migrant::bench
