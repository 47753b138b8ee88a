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

#include "migrant/bench/payload.hpp"

#include <chrono>
#include <stdexcept>

namespace migrant::bench {

std::int64_t mono_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string make_payload(std::size_t size, std::int64_t ts, std::mt19937_64& rng) {
    if (size < kTimestampBytes) throw std::invalid_argument("payload must hold an 8-byte timestamp");
    std::string p(size, '\0');
    const auto u = static_cast<std::uint64_t>(ts);
    for (std::size_t i = 0; i < kTimestampBytes; ++i) p[i] = static_cast<char>(u >> (56 - 8 * i));
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::size_t i = kTimestampBytes; i < size; ++i) p[i] = static_cast<char>(byte(rng));
    return p;
}

std::optional<std::int64_t> read_timestamp(std::string_view p) {
    if (p.size() < kTimestampBytes) return std::nullopt;
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < kTimestampBytes; ++i) u = (u << 8) | static_cast<std::uint8_t>(p[i]);
    return static_cast<std::int64_t>(u);
}

}  // namespace migrant::bench
