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
#include <string>
#include <vector>

#include "migrant/cluster/server.hpp"
#include "migrant/core/config.hpp"
#include "migrant/engine/engine.hpp"
#include "migrant/net/client_listener.hpp"
#include "migrant/net/event_loop.hpp"
#include "migrant/net/peer_net.hpp"

namespace migrant::net {

struct NodeConfig {
    std::string listen_address = "0.0.0.0:7400";
    std::string peer_address = "0.0.0.0:7500";
    /// Every member, self included. Empty or one entry runs a single server.
    std::vector<PeerAddress> members;
    engine::EngineConfig engine;
    cluster::ServerConfig cluster;
    std::string log_level = "info";
    /// When set, a JSON stats snapshot is rewritten here every stats_interval.
    std::string stats_file;
    rt::Duration stats_interval = std::chrono::seconds(1);

    /// Reads the daemon's key=value format; throws ConfigError.
    static NodeConfig from(const KeyValueConfig& kv);
};

/// Parses "0@10.0.0.1:7500, 1@10.0.0.2:7500"; throws ConfigError.
std::vector<PeerAddress> parse_members(const std::string& text);

struct NodeStats {
    std::uint64_t connections = 0;
    std::uint64_t bytes_out = 0;
    std::uint64_t notifications = 0;
    std::uint64_t slow_consumer_disconnects = 0;
    std::uint64_t pubacks = 0;
    std::uint64_t assigned = 0;
    bool serving = false;
    bool fenced = false;
};

/// A broker process: engine, replication server, client listener and peer links on
/// io_threads + workers + 1 event loops.
class ServerNode {
public:
    explicit ServerNode(NodeConfig config);
    ~ServerNode();

    ServerNode(const ServerNode&) = delete;
    ServerNode& operator=(const ServerNode&) = delete;

    /// Binds both listeners and starts the loops.
    void start();
    void stop();

    std::uint16_t client_port() const { return client_port_; }
    std::uint16_t peer_port() const { return peer_port_; }
    /// Thread-safe.
    NodeStats stats();
    engine::Engine& engine() { return *engine_; }
    EventLoop& control() { return *control_; }

private:
    void write_stats();

    NodeConfig config_;
    rt::SteadyClock clock_;
    std::vector<std::unique_ptr<EventLoop>> io_;
    std::vector<std::unique_ptr<EventLoop>> workers_;
    std::unique_ptr<EventLoop> control_;
    std::unique_ptr<ClientListener> listener_;
    std::unique_ptr<engine::Engine> engine_;
    std::unique_ptr<cluster::Server> server_;
    std::unique_ptr<PeerNet> peers_;
    std::uint16_t client_port_ = 0;
    std::uint16_t peer_port_ = 0;
    bool started_ = false;
};

}  // namespace migrant::net
