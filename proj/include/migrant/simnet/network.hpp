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
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "migrant/core/types.hpp"
#include "migrant/runtime/virtual_scheduler.hpp"

namespace migrant::simnet {

using namespace std::chrono_literals;

using NodeId = std::uint32_t;

struct LinkConfig {
    rt::Duration min_delay = 1ms;
    rt::Duration max_delay = 10ms;
};

/// Reliable FIFO message links between endpoints on a virtual clock. A message is
/// lost only when its link is cut (partition), either endpoint crashed, or a
/// DropNext budget is pending.
class Network {
public:
    using Handler = std::function<void(NodeId from, Bytes bytes)>;

    Network(rt::VirtualScheduler& sched, std::uint64_t seed, LinkConfig config = {});

    /// Registers (or re-registers after restart) an endpoint.
    void attach(NodeId id, Handler handler);
    /// Crash: drops the endpoint and everything in flight to or from it.
    void detach(NodeId id);
    bool attached(NodeId id) const { return handlers_.count(id) != 0; }

    void send(NodeId from, NodeId to, Bytes bytes);

    /// Cuts every link between members of different groups. Endpoints not named in
    /// any group are unaffected.
    void partition(const std::vector<std::set<NodeId>>& groups);
    void heal();
    bool reachable(NodeId a, NodeId b) const;

    /// Silently drops the next `count` messages sent on the directed link.
    void drop_next(NodeId from, NodeId to, std::uint32_t count) { drop_budget_[{from, to}] += count; }

    std::uint64_t sent() const { return sent_; }
    std::uint64_t delivered() const { return delivered_; }
    std::uint64_t dropped() const { return dropped_; }

private:
    std::uint64_t generation(NodeId id) const {
        auto it = generation_.find(id);
        return it == generation_.end() ? 0 : it->second;
    }

    rt::VirtualScheduler& sched_;
    std::mt19937_64 rng_;
    LinkConfig config_;
    std::map<NodeId, Handler> handlers_;
    std::map<NodeId, std::uint64_t> generation_;
    std::map<NodeId, std::size_t> group_of_;
    std::map<std::pair<NodeId, NodeId>, rt::TimePoint> last_arrival_;
    std::map<std::pair<NodeId, NodeId>, std::uint32_t> drop_budget_;
    std::uint64_t sent_ = 0;
    std::uint64_t delivered_ = 0;
    std::uint64_t dropped_ = 0;
};

}  // namespace migrant::simnet
