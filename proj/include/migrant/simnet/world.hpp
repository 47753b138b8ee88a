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

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "migrant/client/client.hpp"
#include "migrant/cluster/server.hpp"
#include "migrant/engine/engine.hpp"
#include "migrant/simnet/network.hpp"
#include "migrant/simnet/trace.hpp"

namespace migrant::simnet {

inline constexpr NodeId kClientBase = 1000;

struct WorldConfig {
    std::uint64_t seed = 1;
    std::size_t servers = 3;
    LinkConfig link;
    /// server_id is set per server.
    engine::EngineConfig engine;
    /// self, servers, restarted and seed are set per server.
    cluster::ServerConfig cluster;
    /// A crashed server's client connections are reset (clients see the close after one link delay).
    bool crash_resets_connections = true;
};

/// N servers and any number of SDK clients on one virtual clock and network.
/// Server i is ServerId{i} at address "s<i>"; client j is network node kClientBase + j.
class World final : public cluster::ClusterObserver {
public:
    explicit World(WorldConfig config);
    ~World() override;

    World(const World&) = delete;
    World& operator=(const World&) = delete;

    rt::VirtualScheduler& sched() { return sched_; }
    Network& net() { return net_; }
    Trace& trace() { return trace_; }
    const WorldConfig& config() const { return config_; }

    std::size_t server_count() const { return servers_.size(); }
    bool alive(std::size_t i) const { return servers_.at(i) != nullptr; }
    cluster::Server& server(std::size_t i);
    engine::Engine& engine(std::size_t i);
    static std::string address(std::size_t i) { return "s" + std::to_string(i); }

    void crash(std::size_t i);
    void restart(std::size_t i);
    void partition(const std::vector<std::set<std::size_t>>& server_groups);
    void heal();
    void drop_next(std::size_t from, std::size_t to, std::uint32_t count);

    /// Adds an SDK client; its events are recorded in the trace. Not started.
    client::Client& add_client(client::ClientConfig config);
    client::Client& client(std::size_t j);
    /// Publishes through client `j`, recording Publish and Acked/Failed events.
    MsgId publish(std::size_t j, const TopicName& topic, std::string payload, bool require_ack);
    std::size_t client_count() const { return clients_.size(); }

    /// Runs until `pred` holds or `limit` of virtual time passes; returns pred().
    template <class Pred>
    bool run_until(Pred pred, rt::Duration limit) {
        const auto end = sched_.now() + limit;
        while (!pred()) {
            if (sched_.empty() || sched_.next_time() > end) {
                sched_.run_until(end);
                return pred();
            }
            sched_.step();
        }
        return true;
    }
    void run_for(rt::Duration d) { sched_.run_for(d); }

    std::int64_t now_us() const;

    // ClusterObserver
    void on_won(ServerId, GroupId, std::uint64_t) override;
    void on_lost(ServerId, GroupId) override;
    void on_assign(ServerId, GroupId, const Message&) override;
    void on_append(ServerId, const Message&) override;
    void on_puback(ServerId, const Message&) override;
    void on_pubnack(ServerId, MsgId, wire::NackReason) override;
    void on_gap(ServerId, ServerId, const Message&) override;
    void on_reconcile(ServerId, ServerId, std::uint32_t, cluster::ReconcileReason) override;
    void on_fence(ServerId) override;
    void on_ready(ServerId) override;
    void on_peer_state(ServerId, ServerId, bool) override;

private:
    struct SimServer;
    struct SimClient;
    class Transport;
    class SimLink;
    class Connector;
    struct LinkState;

    void start_server(std::size_t i, bool restarted);
    void server_receive(std::size_t i, NodeId from, Bytes bytes);
    void client_receive(std::size_t j, NodeId from, Bytes bytes);
    void record(TraceEvent e);
    rt::Duration rst_delay();

    WorldConfig config_;
    rt::VirtualScheduler sched_;
    Network net_;
    Trace trace_;
    std::mt19937_64 rng_;
    std::vector<std::unique_ptr<SimServer>> servers_;
    std::vector<std::uint64_t> incarnations_;
    std::vector<std::unique_ptr<SimClient>> clients_;
    std::map<std::uint64_t, std::shared_ptr<LinkState>> links_;
    std::uint64_t next_link_ = 1;
};

}  // namespace migrant::simnet
