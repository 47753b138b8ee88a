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

#include "migrant/bench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace migrant::bench {

double nearest_rank(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("nearest_rank of an empty sample");
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

LatencyStats compute_stats(std::vector<double> samples) {
    LatencyStats s;
    s.count = samples.size();
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double ss = 0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    s.mean = mean;
    s.stdev = std::sqrt(ss / n);
    s.median = nearest_rank(samples, 50);
    s.p90 = nearest_rank(samples, 90);
    s.p95 = nearest_rank(samples, 95);
    s.p99 = nearest_rank(samples, 99);
    return s;
}

}  // namespace migrant::bench
