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

#include "migrant/client/reconnect.hpp"

#include <algorithm>

namespace migrant::client {

rt::Duration ReconnectPolicy::nominal(std::uint32_t attempt) const {
    if (mode == Mode::RandomWait) return min_wait + (max_wait - min_wait) / 2;
    if (attempt == 0) return rt::Duration::zero();
    auto d = base;
    for (std::uint32_t i = 1; i < attempt && d < cap; ++i) d *= 2;
    return std::min(d, cap);
}

rt::Duration ReconnectPolicy::delay(std::uint32_t attempt, std::mt19937_64& rng) const {
    if (mode == Mode::RandomWait) {
        return rt::Duration(std::uniform_int_distribution<std::int64_t>(min_wait.count(), max_wait.count())(rng));
    }
    const auto n = nominal(attempt);
    if (!jitter) return n;
    const double f = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
    return rt::Duration(static_cast<std::int64_t>(static_cast<double>(n.count()) * f));
}

}  // namespace migrant::client
