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

#include "migrant/engine/topic_cache.hpp"

#include <algorithm>

namespace migrant::engine {

TopicCache::TopicCache(std::uint32_t num_groups, std::size_t depth) : depth_(depth) {
    if (num_groups == 0) throw InvalidArgument("num_groups must be >= 1");
    if (depth == 0) throw InvalidArgument("cache depth must be >= 1");
    groups_.reserve(num_groups);
    for (std::uint32_t i = 0; i < num_groups; ++i) groups_.push_back(std::make_unique<Group>());
}

std::unique_lock<std::mutex> TopicCache::lock(const Group& g) const {
    std::unique_lock<std::mutex> l(g.mu, std::try_to_lock);
    if (!l.owns_lock()) {
        g.contended.fetch_add(1, std::memory_order_relaxed);
        l.lock();
    }
    return l;
}

TopicCache::AppendResult TopicCache::append(const Message& m) {
    auto& g = group(m.topic);
    auto l = lock(g);
    auto& h = g.topics[m.topic];
    if (!h.messages.empty() && m.key <= h.messages.back().key) return AppendResult::Stale;
    if (h.messages.empty() && m.key <= h.evicted_upto) return AppendResult::Stale;
    h.messages.push_back(m);
    while (h.messages.size() > depth_) {
        h.evicted_upto = h.messages.front().key;
        h.messages.pop_front();
    }
    return AppendResult::Appended;
}

TopicCache::ReadResult TopicCache::read_after(const TopicName& topic, OrderKey after) const {
    ReadResult r;
    const auto& g = group(topic);
    auto l = lock(g);
    auto it = g.topics.find(topic);
    if (it == g.topics.end()) return r;
    const auto& h = it->second;
    r.truncated = h.evicted_upto > after;
    if (!h.messages.empty()) r.head = h.messages.back().key;
    auto first = std::upper_bound(h.messages.begin(), h.messages.end(), after,
                                  [](OrderKey k, const Message& m) { return k < m.key; });
    r.messages.assign(first, h.messages.end());
    return r;
}

std::optional<OrderKey> TopicCache::last_key(const TopicName& topic) const {
    const auto& g = group(topic);
    auto l = lock(g);
    auto it = g.topics.find(topic);
    if (it == g.topics.end() || it->second.messages.empty()) return std::nullopt;
    return it->second.messages.back().key;
}

OrderKey TopicCache::evicted_upto(const TopicName& topic) const {
    const auto& g = group(topic);
    auto l = lock(g);
    auto it = g.topics.find(topic);
    return it == g.topics.end() ? OrderKey{} : it->second.evicted_upto;
}

void TopicCache::mark_truncated(const TopicName& topic, OrderKey upto) {
    auto& g = group(topic);
    auto l = lock(g);
    auto& h = g.topics[topic];
    if (upto > h.evicted_upto) h.evicted_upto = upto;
}

void TopicCache::clear() {
    for (auto& g : groups_) {
        auto l = lock(*g);
        g->topics.clear();
    }
}

std::vector<std::pair<TopicName, OrderKey>> TopicCache::heads(GroupId group) const {
    std::vector<std::pair<TopicName, OrderKey>> out;
    const auto& g = *groups_.at(group.index);
    auto l = lock(g);
    for (const auto& [topic, h] : g.topics) {
        if (!h.messages.empty()) out.emplace_back(topic, h.messages.back().key);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void TopicCache::for_each_topic(
    GroupId group,
    const std::function<void(const TopicName&, const std::deque<Message>&, OrderKey)>& fn) const {
    const auto& g = *groups_.at(group.index);
    auto l = lock(g);
    for (const auto& [topic, h] : g.topics) fn(topic, h.messages, h.evicted_upto);
}

std::map<TopicName, std::vector<OrderKey>> TopicCache::key_snapshot() const {
    std::map<TopicName, std::vector<OrderKey>> out;
    for (const auto& gp : groups_) {
        auto l = lock(*gp);
        for (const auto& [topic, h] : gp->topics) {
            if (h.messages.empty()) continue;
            auto& keys = out[topic];
            for (const auto& m : h.messages) keys.push_back(m.key);
        }
    }
    return out;
}

std::size_t TopicCache::size(const TopicName& topic) const {
    const auto& g = group(topic);
    auto l = lock(g);
    auto it = g.topics.find(topic);
    return it == g.topics.end() ? 0 : it->second.messages.size();
}

std::uint64_t TopicCache::contended_acquisitions(GroupId group) const {
    return groups_.at(group.index)->contended.load(std::memory_order_relaxed);
}

std::uint64_t TopicCache::total_contended_acquisitions() const {
    std::uint64_t n = 0;
    for (const auto& g : groups_) n += g->contended.load(std::memory_order_relaxed);
    return n;
}

}  // namespace migrant::engine
