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
#include <span>
#include <string_view>

#include "migrant/core/types.hpp"

namespace migrant {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// FNV-1a, 64-bit.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = kFnvOffsetBasis;
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

inline constexpr std::uint32_t kDefaultNumGroups = 100;

/// Maps a topic to its group: FNV-1a-64(topic bytes) mod num_groups.
GroupId topic_group(const TopicName& topic, std::uint32_t num_groups);

/// Maps a client address ("ip:port" or any stable string) to a shard in [0, n_shards).
std::uint32_t client_shard(std::string_view client_address, std::uint32_t n_shards);

}  // namespace migrant
