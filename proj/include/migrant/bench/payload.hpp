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
#include <random>
#include <string>
#include <string_view>

namespace migrant::bench {

inline constexpr std::size_t kTimestampBytes = 8;

/// Nanoseconds on the host's monotonic clock, comparable across processes.
std::int64_t mono_ns();

/// `size` bytes: the big-endian timestamp followed by random filler. Throws if size < 8.
std::string make_payload(std::size_t size, std::int64_t timestamp_ns, std::mt19937_64& rng);
std::optional<std::int64_t> read_timestamp(std::string_view payload);

}  // namespace migrant::bench
