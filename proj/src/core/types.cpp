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

#include "migrant/core/types.hpp"

#include <iomanip>

#include "migrant/core/hash.hpp"

namespace migrant {

bool TopicName::valid(std::string_view name) noexcept {
    if (name.empty() || name.size() > kMaxBytes) return false;
    for (char c : name) {
        auto u = static_cast<unsigned char>(c);
        if (u < 0x20 || u == 0x7f) return false;
    }
    return true;
}

TopicName::TopicName(std::string name) : name_(std::move(name)) {
    if (!valid(name_)) throw InvalidArgument("invalid topic name");
}

std::ostream& operator<<(std::ostream& os, const TopicName& t) { return os << t.str(); }

std::ostream& operator<<(std::ostream& os, ServerId s) { return os << 's' << s.id; }

std::ostream& operator<<(std::ostream& os, OrderKey k) {
    return os << '(' << k.epoch << ',' << k.seq << ')';
}

std::ostream& operator<<(std::ostream& os, MsgId id) {
    auto flags = os.flags();
    os << std::hex << std::setfill('0') << std::setw(16) << id.hi << std::setw(16) << id.lo;
    os.flags(flags);
    return os;
}

Ordering compare(OrderKey a, OrderKey b) noexcept {
    if (a.epoch != b.epoch) return a.epoch < b.epoch ? Ordering::Less : Ordering::Greater;
    if (a.seq != b.seq) return a.seq < b.seq ? Ordering::Less : Ordering::Greater;
    return Ordering::Equal;
}

GroupId topic_group(const TopicName& topic, std::uint32_t num_groups) {
    if (num_groups == 0) throw InvalidArgument("num_groups must be >= 1");
    return GroupId{static_cast<std::uint32_t>(fnv1a64(topic.str()) % num_groups)};
}

std::uint32_t client_shard(std::string_view client_address, std::uint32_t n_shards) {
    if (n_shards == 0) throw InvalidArgument("n_shards must be >= 1");
    return static_cast<std::uint32_t>(fnv1a64(client_address) % n_shards);
}

}  // namespace migrant
