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

#include <cstddef>
#include <unordered_set>
#include <vector>

#include "migrant/core/types.hpp"

namespace migrant::client {

/// The last `capacity` distinct message ids seen, oldest evicted first.
class DedupeBuffer {
public:
    explicit DedupeBuffer(std::size_t capacity = 1024);

    /// Returns true if `id` is in the window; otherwise records it and returns false.
    bool seen(const MsgId& id);
    bool contains(const MsgId& id) const { return ids_.count(id) != 0; }
    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t capacity() const noexcept { return ring_.size(); }

private:
    std::vector<MsgId> ring_;
    std::size_t next_ = 0;
    std::size_t filled_ = 0;
    std::unordered_set<MsgId> ids_;
};

}  // namespace migrant::client
