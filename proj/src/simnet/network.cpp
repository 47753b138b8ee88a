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

#include "migrant/simnet/network.hpp"

namespace migrant::simnet {

Network::Network(rt::VirtualScheduler& sched, std::uint64_t seed, LinkConfig config)
    : sched_(sched), rng_(seed), config_(config) {
    if (config_.max_delay < config_.min_delay) throw InvalidArgument("max link delay below min");
}

void Network::attach(NodeId id, Handler handler) {
    ++generation_[id];
    handlers_[id] = std::move(handler);
}

void Network::detach(NodeId id) {
    ++generation_[id];
    handlers_.erase(id);
}

bool Network::reachable(NodeId a, NodeId b) const {
    auto ia = group_of_.find(a);
    auto ib = group_of_.find(b);
    if (ia == group_of_.end() || ib == group_of_.end()) return true;
    return ia->second == ib->second;
}

void Network::partition(const std::vector<std::set<NodeId>>& groups) {
    group_of_.clear();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (auto id : groups[g]) group_of_[id] = g;
    }
}

void Network::heal() { group_of_.clear(); }

void Network::send(NodeId from, NodeId to, Bytes bytes) {
    ++sent_;
    if (!attached(from) || !attached(to) || !reachable(from, to)) {
        ++dropped_;
        return;
    }
    if (auto it = drop_budget_.find({from, to}); it != drop_budget_.end() && it->second > 0) {
        if (--it->second == 0) drop_budget_.erase(it);
        ++dropped_;
        return;
    }
    std::uniform_int_distribution<std::int64_t> d(config_.min_delay.count(), config_.max_delay.count());
    auto at = sched_.now() + rt::Duration(d(rng_));
    auto& last = last_arrival_[{from, to}];
    if (at < last) at = last;
    last = at;
    const auto gen_from = generation(from);
    const auto gen_to = generation(to);
    sched_.schedule_at(at, [this, from, to, gen_from, gen_to, b = std::move(bytes)]() mutable {
        if (generation(from) != gen_from || generation(to) != gen_to || !reachable(from, to)) {
            ++dropped_;
            return;
        }
        auto it = handlers_.find(to);
        if (it == handlers_.end()) {
            ++dropped_;
            return;
        }
        ++delivered_;
        auto handler = it->second;
        handler(from, std::move(b));
    });
}

}  // namespace migrant::simnet
