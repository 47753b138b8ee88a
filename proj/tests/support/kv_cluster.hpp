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

#include <memory>
#include <vector>

#include "migrant/coordkv/node.hpp"
#include "migrant/simnet/network.hpp"

namespace migrant::testing {

/// N coordkv replicas on one virtual network.
class KvCluster {
public:
    KvCluster(std::size_t n, std::uint64_t seed, coordkv::NodeConfig base = {})
        : net_(sched_, seed), base_(base), seed_(seed), slots_(n) {
        for (std::size_t i = 0; i < n; ++i) base_.members.push_back(ServerId{static_cast<std::uint32_t>(i)});
        for (std::size_t i = 0; i < n; ++i) start(i, false);
    }

    ~KvCluster() {
        for (auto& s : slots_) s.node.reset();
    }

    void start(std::size_t i, bool rejoining) {
        auto& s = slots_[i];
        s.token = std::make_shared<bool>(true);
        s.exec = std::make_unique<rt::VirtualExecutor>(sched_, s.token);
        auto cfg = base_;
        cfg.self = ServerId{static_cast<std::uint32_t>(i)};
        cfg.rejoining = rejoining;
        cfg.seed = seed_ * 1000 + (++s.incarnations);
        const auto self = static_cast<simnet::NodeId>(i);
        s.node = std::make_unique<coordkv::Node>(cfg, *s.exec, sched_, [this, self](ServerId to, Bytes b) {
            net_.send(self, to.id, std::move(b));
        });
        auto* node = s.node.get();
        net_.attach(self, [node](simnet::NodeId from, Bytes b) { node->on_message(ServerId{from}, b); });
        node->start();
    }

    void crash(std::size_t i) {
        auto& s = slots_[i];
        *s.token = false;
        net_.detach(static_cast<simnet::NodeId>(i));
        s.node.reset();
    }

    void restart(std::size_t i) { start(i, true); }

    bool alive(std::size_t i) const { return slots_[i].node != nullptr; }
    coordkv::Node& node(std::size_t i) { return *slots_[i].node; }
    std::size_t size() const { return slots_.size(); }

    /// Index of the unique live leader with the highest term, or -1.
    int leader() const {
        int best = -1;
        std::uint64_t term = 0;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            const auto& n = slots_[i].node;
            if (n && n->is_leader() && n->term() >= term) {
                best = static_cast<int>(i);
                term = n->term();
            }
        }
        return best;
    }

    template <class Pred>
    bool run_until(Pred pred, rt::Duration limit) {
        const auto end = sched_.now() + limit;
        while (!pred()) {
            if (sched_.empty() || sched_.next_time() > end) return false;
            sched_.step();
        }
        return true;
    }

    bool all_sessions_live() {
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (alive(i) && node(i).session_state() != coordkv::SessionState::Live) return false;
        }
        return true;
    }

    rt::VirtualScheduler& sched() { return sched_; }
    simnet::Network& net() { return net_; }

private:
    struct Slot {
        rt::VirtualScheduler::Token token;
        std::unique_ptr<rt::VirtualExecutor> exec;
        std::unique_ptr<coordkv::Node> node;
        std::uint64_t incarnations = 0;
    };

    rt::VirtualScheduler sched_;
    simnet::Network net_;
    coordkv::NodeConfig base_;
    std::uint64_t seed_;
    std::vector<Slot> slots_;
};

}  // namespace migrant::testing
