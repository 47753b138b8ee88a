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

#include "migrant/client/dedupe.hpp"

namespace migrant::client {

DedupeBuffer::DedupeBuffer(std::size_t capacity) : ring_(capacity) {
    if (capacity == 0) throw InvalidArgument("dedupe capacity must be >= 1");
    ids_.reserve(capacity * 2);
}

bool DedupeBuffer::seen(const MsgId& id) {
    if (ids_.count(id)) return true;
    if (filled_ == ring_.size()) {
        ids_.erase(ring_[next_]);
    } else {
        ++filled_;
    }
    ring_[next_] = id;
    next_ = (next_ + 1) % ring_.size();
    ids_.insert(id);
    return false;
}

}  // namespace migrant::client
