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

#include "migrant/net/node.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace migrant::net {

std::vector<PeerAddress> parse_members(const std::string& text) {
    std::vector<PeerAddress> out;
    std::string item;
    auto flush = [&] {
        const auto t = trim(item);
        item.clear();
        if (t.empty()) return;
        const auto at = t.find('@');
        if (at == std::string::npos) throw ConfigError("member must be id@host:port: '" + t + "'");
        PeerAddress p;
        try {
            std::size_t used = 0;
            p.id = ServerId{static_cast<std::uint32_t>(std::stoul(t.substr(0, at), &used))};
            if (used != at) throw std::invalid_argument("id");
        } catch (const std::exception&) {
            throw ConfigError("bad member id in '" + t + "'");
        }
        p.address = t.substr(at + 1);
        try {
            parse_host_port(p.address);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        for (const auto& q : out)
            if (q.id == p.id) throw ConfigError("member " + std::to_string(p.id.id) + " listed twice");
        out.push_back(std::move(p));
    };
    for (char c : text) {
        if (c == ',' || c == ' ' || c == '\t') flush();
        else item += c;
    }
    flush();
    return out;
}

NodeConfig NodeConfig::from(const KeyValueConfig& kv) {
    NodeConfig c;
    const auto id = kv.get_u64("server_id", 0);
    c.engine.server_id = static_cast<std::uint32_t>(id);
    c.cluster.self = ServerId{static_cast<std::uint32_t>(id)};
    c.listen_address = kv.get("listen_address", c.listen_address);
    c.peer_address = kv.get("peer_address", c.peer_address);
    c.members = parse_members(kv.get("peers", ""));
    c.engine.io_threads = static_cast<std::uint32_t>(kv.get_u64("io_threads", c.engine.io_threads));
    c.engine.workers = static_cast<std::uint32_t>(kv.get_u64("workers", c.engine.workers));
    c.engine.num_groups = static_cast<std::uint32_t>(kv.get_u64("num_groups", c.engine.num_groups));
    c.engine.cache_depth = kv.get_u64("cache_depth", c.engine.cache_depth);
    c.engine.batch.max_delay = kv.get_duration("batch_max_delay_ms", c.engine.batch.max_delay);
    c.engine.batch.max_bytes = kv.get_u64("batch_max_bytes", c.engine.batch.max_bytes);
    c.engine.conflation.window = kv.get_duration("conflation_window_ms", c.engine.conflation.window);
    c.engine.max_outbound_bytes = kv.get_u64("max_outbound_bytes", c.engine.max_outbound_bytes);
    c.engine.max_connections = kv.get_u64("max_connections", c.engine.max_connections);
    c.cluster.t_pub = kv.get_duration("t_pub", c.cluster.t_pub);
    c.cluster.t_timeout = kv.get_duration("t_timeout", c.cluster.t_timeout);
    c.cluster.ping_interval = kv.get_duration("ping_interval", c.cluster.ping_interval);
    c.cluster.kv.session_timeout = kv.get_duration("session_timeout", c.cluster.kv.session_timeout);
    c.cluster.restarted = kv.get_bool("rejoin", false);
    c.cluster.seed = kv.get_u64("seed", 0x5eed + id);
    c.log_level = kv.get("log_level", c.log_level);
    c.stats_file = kv.get("stats_file", "");
    c.stats_interval = kv.get_duration("stats_interval", c.stats_interval);

    if (c.engine.io_threads < 1 || c.engine.io_threads > 255) throw ConfigError("io_threads must be in 1..255");
    if (c.engine.workers < 1 || c.engine.workers > 255) throw ConfigError("workers must be in 1..255");
    if (c.engine.num_groups < 1) throw ConfigError("num_groups must be positive");
    if (c.engine.cache_depth < 1) throw ConfigError("cache_depth must be positive");
    if (!c.members.empty()) {
        bool self = false;
        for (const auto& m : c.members) self |= m.id == c.cluster.self;
        if (!self) throw ConfigError("peers does not list server_id " + std::to_string(id));
        if (c.members.size() == 2) throw ConfigError("a cluster needs one or at least three servers");
    }
    auto unused = kv.unused();
    if (!unused.empty()) throw ConfigError("unknown key '" + unused.front() + "'");
    return c;
}

ServerNode::ServerNode(NodeConfig config) : config_(std::move(config)) {
    auto& ec = config_.engine;
    engine::EngineRuntime rt;
    rt.clock = &clock_;
    std::vector<EventLoop*> io;
    for (std::uint32_t i = 0; i < ec.io_threads; ++i) {
        io_.push_back(std::make_unique<EventLoop>("io" + std::to_string(i)));
        io.push_back(io_.back().get());
        rt.io.push_back(io.back());
    }
    for (std::uint32_t i = 0; i < ec.workers; ++i) {
        workers_.push_back(std::make_unique<EventLoop>("worker" + std::to_string(i)));
        rt.workers.push_back(workers_.back().get());
    }
    control_ = std::make_unique<EventLoop>("control");
    rt.control = control_.get();
    listener_ = std::make_unique<ClientListener>(*control_, io);
    rt.transport = listener_.get();
    engine_ = std::make_unique<engine::Engine>(ec, rt);
    listener_->attach(*engine_);

    auto cc = config_.cluster;
    cc.self = ServerId{ec.server_id};
    cc.servers.clear();
    for (const auto& m : config_.members) cc.servers.push_back(m.id);
    if (cc.servers.empty()) cc.servers.push_back(cc.self);
    std::sort(cc.servers.begin(), cc.servers.end());

    PeerNetConfig pc;
    pc.self = cc.self;
    pc.listen_address = config_.peer_address;
    for (const auto& m : config_.members)
        if (m.id != cc.self) pc.peers.push_back(m);
    peers_ = std::make_unique<PeerNet>(*control_, pc, [this](ServerId from, wire::Frame f) {
        server_->on_peer_frame(from, std::move(f));
    });
    server_ = std::make_unique<cluster::Server>(
        cc, *engine_, [this](ServerId to, const wire::Frame& f) { peers_->send(to, f); });
}

ServerNode::~ServerNode() {
    stop();
    server_.reset();
    engine_.reset();
}

void ServerNode::start() {
    if (started_) return;
    started_ = true;
    for (auto& l : io_) l->start();
    for (auto& l : workers_) l->start();
    control_->start();
    if (server_->replicated()) peer_port_ = peers_->start();
    control_->run_sync([this] { server_->start(); });
    client_port_ = listener_->listen(config_.listen_address);
    if (!config_.stats_file.empty()) control_->post([this] { write_stats(); });
    spdlog::info("server {} listening on port {} (peers on {})", config_.engine.server_id, client_port_, peer_port_);
}

void ServerNode::stop() {
    if (!started_) return;
    started_ = false;
    listener_->stop();
    if (server_->replicated()) peers_->stop();
    control_->stop();
    for (auto& l : workers_) l->stop();
    for (auto& l : io_) l->stop();
}

NodeStats ServerNode::stats() {
    NodeStats s;
    auto& es = engine_->stats();
    s.connections = engine_->connection_count();
    s.bytes_out = es.bytes_out.load();
    s.notifications = es.notifications.load();
    s.slow_consumer_disconnects = es.slow_consumer_disconnects.load();
    auto read = [&] {
        s.pubacks = server_->stats().pubacks;
        s.assigned = server_->stats().assigned;
        s.serving = server_->serving();
        s.fenced = server_->fenced();
    };
    if (control_->in_loop_thread()) read();
    else control_->run_sync(read);
    return s;
}

void ServerNode::write_stats() {
    const auto s = stats();
    const auto tmp = config_.stats_file + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << fmt::format(
            "{{\"server_id\":{},\"pid\":{},\"connections\":{},\"bytes_out\":{},\"notifications\":{},"
            "\"slow_consumer_disconnects\":{},\"pubacks\":{},\"assigned\":{},\"serving\":{},\"fenced\":{}}}\n",
            config_.engine.server_id, static_cast<long>(::getpid()), s.connections, s.bytes_out, s.notifications,
            s.slow_consumer_disconnects, s.pubacks, s.assigned, s.serving, s.fenced);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, config_.stats_file, ec);
    control_->post_after(config_.stats_interval, [this] { write_stats(); });
}

}  // namespace migrant::net
