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

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "migrant/core/hash.hpp"
#include "migrant/core/types.hpp"

namespace migrant::engine {

/// Recent-message history per topic, sharded by topic group. Each group has its own
/// lock; operations on topics of different groups never contend.
class TopicCache {
public:
    enum class AppendResult {
        Appended,
        Stale,  // key <= newest cached key of the topic; dropped
    };

    struct ReadResult {
        std::vector<Message> messages;
        /// True when messages newer than the requested point were evicted.
        bool truncated = false;
        /// Newest cached key of the topic, (0,0) when empty.
        OrderKey head;
    };

    TopicCache(std::uint32_t num_groups, std::size_t depth);

    std::uint32_t num_groups() const noexcept { return static_cast<std::uint32_t>(groups_.size()); }
    std::size_t depth() const noexcept { return depth_; }
    GroupId group_of(const TopicName& topic) const { return topic_group(topic, num_groups()); }

    AppendResult append(const Message& m);

    /// Cached messages of `topic` with key > `after`, oldest first.
    ReadResult read_after(const TopicName& topic, OrderKey after) const;

    /// Newest cached key, or nullopt when the topic has no history.
    std::optional<OrderKey> last_key(const TopicName& topic) const;

    /// Newest key ever evicted from (or declared missing in) the topic's history.
    OrderKey evicted_upto(const TopicName& topic) const;

    /// Records that nothing up to `upto` can be served for `topic` (remote history truncated).
    void mark_truncated(const TopicName& topic, OrderKey upto);

    /// Drops every topic's history and eviction horizon.
    void clear();

    /// Newest key of every topic in `group` that has history.
    std::vector<std::pair<TopicName, OrderKey>> heads(GroupId group) const;

    /// Every cached message of `group`, grouped by topic, oldest first within a topic.
    /// Calls fn(topic, messages_after_known, truncated_upto) for each topic of the group.
    void for_each_topic(GroupId group,
                        const std::function<void(const TopicName&, const std::deque<Message>&, OrderKey)>& fn) const;

    /// Keys of the whole cache, for equality checks.
    std::map<TopicName, std::vector<OrderKey>> key_snapshot() const;

    std::size_t size(const TopicName& topic) const;

    /// Number of lock acquisitions on `group` that found the lock already held.
    std::uint64_t contended_acquisitions(GroupId group) const;
    std::uint64_t total_contended_acquisitions() const;

private:
    struct History {
        std::deque<Message> messages;
        OrderKey evicted_upto;
    };
    struct Group {
        mutable std::mutex mu;
        mutable std::atomic<std::uint64_t> contended{0};
        std::unordered_map<TopicName, History> topics;
    };

    std::unique_lock<std::mutex> lock(const Group& g) const;
    const Group& group(const TopicName& topic) const { return *groups_[group_of(topic).index]; }
    Group& group(const TopicName& topic) { return *groups_[group_of(topic).index]; }

    std::size_t depth_;
    std::vector<std::unique_ptr<Group>> groups_;
};

}  // namespace migrant::engine
