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

#include "migrant/simnet/world.hpp"

#include <cstring>

#include "migrant/wire/codec.hpp"

namespace migrant::simnet {

namespace {

enum Envelope : std::uint8_t { kOpen = 0, kOpened = 1, kData = 2, kClose = 3 };

Bytes envelope(Envelope type, std::uint64_t serial, std::span<const std::uint8_t> data = {}) {
    Bytes out(9 + data.size());
    out[0] = type;
    std::memcpy(out.data() + 1, &serial, 8);
    if (!data.empty()) std::memcpy(out.data() + 9, data.data(), data.size());
    return out;
}

bool open_envelope(const Bytes& b, Envelope& type, std::uint64_t& serial, std::span<const std::uint8_t>& data) {
    if (b.size() < 9 || b[0] > kClose) return false;
    type = static_cast<Envelope>(b[0]);
    std::memcpy(&serial, b.data() + 1, 8);
    data = std::span<const std::uint8_t>(b.data() + 9, b.size() - 9);
    return true;
}

std::optional<std::size_t> parse_address(const std::string& a) {
    if (a.size() < 2 || a[0] != 's') return std::nullopt;
    std::size_t v = 0;
    for (std::size_t i = 1; i < a.size(); ++i) {
        if (a[i] < '0' || a[i] > '9') return std::nullopt;
        v = v * 10 + static_cast<std::size_t>(a[i] - '0');
    }
    return v;
}

TraceEvent ev(Ev type, std::uint32_t node = 0, std::uint32_t aux = 0, std::uint64_t num = 0, std::string topic = {},
              OrderKey key = {}, MsgId id = {}, std::uint64_t hash = 0) {
    TraceEvent e;
    e.type = type;
    e.node = node;
    e.aux = aux;
    e.num = num;
    e.topic = std::move(topic);
    e.key = key;
    e.id = id;
    e.payload_hash = hash;
    return e;
}

}  // namespace

struct World::LinkState {
    std::uint64_t serial = 0;
    std::size_t client = 0;
    std::size_t server = 0;
    client::LinkHandler* handler = nullptr;
    bool closed = false;
};

class World::Transport final : public engine::ClientTransport {
public:
    Transport(World& w, std::size_t server) : w_(w), server_(server) {}

    std::size_t write(engine::ConnectionId conn, Bytes bytes) override;
    void close(engine::ConnectionId conn) override;

    std::map<std::uint64_t, engine::ConnectionId> by_serial;
    std::unordered_map<engine::ConnectionId, std::pair<std::uint64_t, std::size_t>> by_conn;  // serial, client

private:
    World& w_;
    std::size_t server_;
};

struct World::SimServer {
    rt::VirtualScheduler::Token token;
    std::vector<std::unique_ptr<rt::VirtualExecutor>> execs;
    std::unique_ptr<Transport> transport;
    std::unique_ptr<engine::Engine> engine;
    std::unique_ptr<cluster::Server> server;
};

class World::SimLink final : public client::Link {
public:
    SimLink(World& w, std::shared_ptr<LinkState> st) : w_(w), st_(std::move(st)) {}
    ~SimLink() override { close(); }

    void send(Bytes bytes) override {
        if (st_->closed) return;
        w_.net_.send(kClientBase + static_cast<NodeId>(st_->client), static_cast<NodeId>(st_->server),
                     envelope(kData, st_->serial, bytes));
    }
    void close() override {
        if (st_->closed) return;
        st_->closed = true;
        w_.links_.erase(st_->serial);
        w_.net_.send(kClientBase + static_cast<NodeId>(st_->client), static_cast<NodeId>(st_->server),
                     envelope(kClose, st_->serial));
    }

private:
    World& w_;
    std::shared_ptr<LinkState> st_;
};

class World::Connector final : public client::Connector {
public:
    Connector(World& w, std::size_t client) : w_(w), client_(client) {}

    std::unique_ptr<client::Link> connect(const std::string& address, client::LinkHandler& handler) override {
        auto st = std::make_shared<LinkState>();
        st->serial = w_.next_link_++;
        st->client = client_;
        st->handler = &handler;
        auto server = parse_address(address);
        st->server = server.value_or(0);
        w_.links_[st->serial] = st;
        const auto node = kClientBase + static_cast<NodeId>(client_);
        if (!server || *server >= w_.servers_.size() || !w_.net_.attached(static_cast<NodeId>(*server))) {
            // Connection refused.
            w_.sched_.schedule_after(w_.rst_delay(), [st] {
                if (st->closed) return;
                st->closed = true;
                st->handler->on_link_closed();
            });
        } else {
            w_.net_.send(node, static_cast<NodeId>(*server), envelope(kOpen, st->serial));
        }
        return std::make_unique<SimLink>(w_, st);
    }

private:
    World& w_;
    std::size_t client_;
};

struct World::SimClient {
    rt::VirtualScheduler::Token token;
    std::unique_ptr<rt::VirtualExecutor> exec;
    std::unique_ptr<Connector> connector;
    std::unique_ptr<client::Client> client;
};

std::size_t World::Transport::write(engine::ConnectionId conn, Bytes bytes) {
    auto it = by_conn.find(conn);
    if (it == by_conn.end()) return 0;
    w_.net_.send(static_cast<NodeId>(server_), kClientBase + static_cast<NodeId>(it->second.second),
                 envelope(kData, it->second.first, bytes));
    return 0;
}

void World::Transport::close(engine::ConnectionId conn) {
    auto it = by_conn.find(conn);
    if (it == by_conn.end()) return;
    w_.net_.send(static_cast<NodeId>(server_), kClientBase + static_cast<NodeId>(it->second.second),
                 envelope(kClose, it->second.first));
    by_serial.erase(it->second.first);
    by_conn.erase(it);
}

World::World(WorldConfig config)
    : config_(std::move(config)), net_(sched_, config_.seed, config_.link), rng_(config_.seed * 7919 + 17) {
    if (config_.servers == 0) throw InvalidArgument("world needs at least one server");
    servers_.resize(config_.servers);
    incarnations_.resize(config_.servers, 0);
    for (std::size_t i = 0; i < config_.servers; ++i) start_server(i, false);
}

World::~World() {
    for (auto& c : clients_) {
        *c->token = false;
        c->client.reset();
    }
    for (auto& s : servers_) {
        if (!s) continue;
        *s->token = false;
        s->server.reset();
        s->engine.reset();
    }
}

std::int64_t World::now_us() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(sched_.now().time_since_epoch()).count();
}

rt::Duration World::rst_delay() {
    return rt::Duration(
        std::uniform_int_distribution<std::int64_t>(config_.link.min_delay.count(), config_.link.max_delay.count())(rng_));
}

void World::record(TraceEvent e) {
    e.at_us = now_us();
    trace_.add(std::move(e));
}

cluster::Server& World::server(std::size_t i) {
    if (!servers_.at(i)) throw InvalidArgument("server " + std::to_string(i) + " is down");
    return *servers_[i]->server;
}

engine::Engine& World::engine(std::size_t i) {
    if (!servers_.at(i)) throw InvalidArgument("server " + std::to_string(i) + " is down");
    return *servers_[i]->engine;
}

void World::start_server(std::size_t i, bool restarted) {
    auto s = std::make_unique<SimServer>();
    s->token = std::make_shared<bool>(true);
    auto ecfg = config_.engine;
    ecfg.server_id = static_cast<std::uint32_t>(i);
    engine::EngineRuntime rt;
    rt.clock = &sched_;
    for (std::uint32_t k = 0; k < ecfg.io_threads + ecfg.workers + 1; ++k) {
        s->execs.push_back(std::make_unique<rt::VirtualExecutor>(sched_, s->token));
    }
    for (std::uint32_t k = 0; k < ecfg.io_threads; ++k) rt.io.push_back(s->execs[k].get());
    for (std::uint32_t k = 0; k < ecfg.workers; ++k) rt.workers.push_back(s->execs[ecfg.io_threads + k].get());
    rt.control = s->execs.back().get();
    s->transport = std::make_unique<Transport>(*this, i);
    rt.transport = s->transport.get();
    s->engine = std::make_unique<engine::Engine>(ecfg, rt);

    auto ccfg = config_.cluster;
    ccfg.self = ServerId{static_cast<std::uint32_t>(i)};
    ccfg.servers.clear();
    for (std::size_t k = 0; k < config_.servers; ++k) ccfg.servers.push_back(ServerId{static_cast<std::uint32_t>(k)});
    ccfg.restarted = restarted;
    ccfg.seed = config_.seed * 1000003 + i * 101 + (++incarnations_[i]);
    const auto self = static_cast<NodeId>(i);
    s->server = std::make_unique<cluster::Server>(
        ccfg, *s->engine,
        [this, self](ServerId to, const wire::Frame& f) { net_.send(self, to.id, wire::encode_frame(f)); }, this);
    servers_[i] = std::move(s);
    net_.attach(self, [this, i](NodeId from, Bytes b) { server_receive(i, from, std::move(b)); });
    servers_[i]->server->start();
}

void World::server_receive(std::size_t i, NodeId from, Bytes bytes) {
    auto& s = servers_.at(i);
    if (!s) return;
    if (from < kClientBase) {
        wire::Frame f;
        try {
            if (bytes.size() < wire::kLengthPrefixBytes + 1) throw wire::MalformedFrame("short peer frame");
            f = wire::decode_body(std::span(bytes).subspan(wire::kLengthPrefixBytes));
        } catch (const std::exception&) {
            return;
        }
        s->server->on_peer_frame(ServerId{from}, std::move(f));
        return;
    }
    Envelope type;
    std::uint64_t serial = 0;
    std::span<const std::uint8_t> data;
    if (!open_envelope(bytes, type, serial, data)) return;
    auto& tr = *s->transport;
    const auto client = static_cast<std::size_t>(from - kClientBase);
    switch (type) {
        case kOpen: {
            engine::ConnectionId conn = 0;
            try {
                conn = s->engine->accept("c" + std::to_string(client) + ":" + std::to_string(serial));
            } catch (const engine::ConnectionLimitReached&) {
                net_.send(static_cast<NodeId>(i), from, envelope(kClose, serial));
                return;
            }
            tr.by_serial[serial] = conn;
            tr.by_conn[conn] = {serial, client};
            net_.send(static_cast<NodeId>(i), from, envelope(kOpened, serial));
            return;
        }
        case kData: {
            auto it = tr.by_serial.find(serial);
            if (it == tr.by_serial.end()) {
                net_.send(static_cast<NodeId>(i), from, envelope(kClose, serial));
                return;
            }
            s->engine->on_bytes(it->second, data);
            return;
        }
        case kClose: {
            auto it = tr.by_serial.find(serial);
            if (it == tr.by_serial.end()) return;
            const auto conn = it->second;
            tr.by_conn.erase(conn);
            tr.by_serial.erase(it);
            s->engine->on_disconnected(conn);
            return;
        }
        case kOpened: return;
    }
}

void World::client_receive(std::size_t, NodeId, Bytes bytes) {
    Envelope type;
    std::uint64_t serial = 0;
    std::span<const std::uint8_t> data;
    if (!open_envelope(bytes, type, serial, data)) return;
    auto it = links_.find(serial);
    if (it == links_.end()) return;
    auto st = it->second;
    if (st->closed) {
        links_.erase(it);
        return;
    }
    switch (type) {
        case kOpened: st->handler->on_link_open(); return;
        case kData: st->handler->on_link_bytes(data); return;
        case kClose:
            st->closed = true;
            links_.erase(serial);
            st->handler->on_link_closed();
            return;
        case kOpen: return;
    }
}

client::Client& World::add_client(client::ClientConfig config) {
    const std::size_t j = clients_.size();
    auto c = std::make_unique<SimClient>();
    c->token = std::make_shared<bool>(true);
    c->exec = std::make_unique<rt::VirtualExecutor>(sched_, c->token);
    c->connector = std::make_unique<Connector>(*this, j);
    c->client = std::make_unique<client::Client>(std::move(config), *c->exec, sched_, *c->connector);
    auto* cl = c->client.get();
    const auto node = static_cast<std::uint32_t>(j);
    cl->on_message([this, node](const Message& m, bool recovered) {
        record(ev(Ev::Deliver, node, recovered ? 1u : 0u, 0, m.topic.str(), m.key, m.publisher_msg_id,
                          payload_hash(m.payload)));
    });
    cl->on_status([this, node](client::ClientStatus s, const std::string& addr) {
        const auto server = static_cast<std::uint32_t>(parse_address(addr).value_or(0));
        if (s == client::ClientStatus::Connected) record(ev(Ev::Connected, node, server));
        if (s == client::ClientStatus::Disconnected) record(ev(Ev::Disconnected, node, server));
    });
    cl->on_truncated([this, node](const TopicName& t) { record(ev(Ev::Truncated, node, 0, 0, t.str())); });
    cl->on_subscribed([this, node](const TopicName& t, OrderKey head) {
        record(ev(Ev::Subscribed, node, 0, 0, t.str(), head));
    });
    clients_.push_back(std::move(c));
    net_.attach(kClientBase + node, [this, j](NodeId from, Bytes b) { client_receive(j, from, std::move(b)); });
    return *cl;
}

client::Client& World::client(std::size_t j) { return *clients_.at(j)->client; }

MsgId World::publish(std::size_t j, const TopicName& topic, std::string payload, bool require_ack) {
    const auto node = static_cast<std::uint32_t>(j);
    const auto h = payload_hash(payload);
    auto id = std::make_shared<MsgId>();
    auto done = [this, node, topic, h, id](client::PublishResult r, std::uint32_t attempts) {
        record(ev(r == client::PublishResult::Acked ? Ev::Acked : Ev::Failed, node, 0, attempts,
                          topic.str(), {}, *id, h));
    };
    *id = client(j).publish(topic, std::move(payload), require_ack, done);
    record(ev(Ev::Publish, node, require_ack ? 1u : 0u, 0, topic.str(), {}, *id, h));
    return *id;
}

void World::crash(std::size_t i) {
    auto& s = servers_.at(i);
    if (!s) return;
    record(ev(Ev::Crash, static_cast<std::uint32_t>(i)));
    *s->token = false;
    net_.detach(static_cast<NodeId>(i));
    if (config_.crash_resets_connections) {
        for (auto& [serial, st] : links_) {
            if (st->server != i || st->closed) continue;
            sched_.schedule_after(rst_delay(), [st, tok = clients_.at(st->client)->token] {
                if (!*tok || st->closed) return;
                st->closed = true;
                st->handler->on_link_closed();
            });
        }
    }
    s->server.reset();
    s->engine.reset();
    s.reset();
}

void World::restart(std::size_t i) {
    if (servers_.at(i)) return;
    record(ev(Ev::Restart, static_cast<std::uint32_t>(i)));
    start_server(i, true);
}

void World::partition(const std::vector<std::set<std::size_t>>& server_groups) {
    std::vector<std::set<NodeId>> groups;
    for (const auto& g : server_groups) {
        std::set<NodeId> ids;
        for (auto s : g) ids.insert(static_cast<NodeId>(s));
        groups.push_back(std::move(ids));
    }
    std::string desc;
    for (const auto& g : server_groups) {
        if (!desc.empty()) desc += '|';
        std::string part;
        for (auto s : g) part += (part.empty() ? "" : ",") + std::to_string(s);
        desc += part;
    }
    record(ev(Ev::Partition, 0, 0, groups.size(), desc));
    net_.partition(groups);
}

void World::heal() {
    record(ev(Ev::Heal));
    net_.heal();
}

void World::drop_next(std::size_t from, std::size_t to, std::uint32_t count) {
    record(ev(Ev::DropNext, static_cast<std::uint32_t>(from), static_cast<std::uint32_t>(to), count));
    net_.drop_next(static_cast<NodeId>(from), static_cast<NodeId>(to), count);
}

// ---------------------------------------------------------------------------
// ClusterObserver

void World::on_won(ServerId s, GroupId g, std::uint64_t epoch) { record(ev(Ev::Won, s.id, g.index, epoch)); }

void World::on_lost(ServerId s, GroupId g) { record(ev(Ev::Lost, s.id, g.index)); }

void World::on_assign(ServerId s, GroupId g, const Message& m) {
    record(ev(Ev::Assign, s.id, g.index, 0, m.topic.str(), m.key, m.publisher_msg_id, payload_hash(m.payload)));
}

void World::on_append(ServerId s, const Message& m) {
    record(ev(Ev::Append, s.id, 0, 0, m.topic.str(), m.key, m.publisher_msg_id, payload_hash(m.payload)));
}

void World::on_puback(ServerId s, const Message& m) {
    record(ev(Ev::PubAck, s.id, 0, 0, m.topic.str(), m.key, m.publisher_msg_id, payload_hash(m.payload)));
}

void World::on_pubnack(ServerId s, MsgId id, wire::NackReason r) {
    record(ev(Ev::PubNack, s.id, static_cast<std::uint32_t>(r), 0, {}, {}, id));
}

void World::on_gap(ServerId s, ServerId from, const Message& m) {
    record(ev(Ev::Gap, s.id, from.id, 0, m.topic.str(), m.key));
}

void World::on_reconcile(ServerId s, ServerId peer, std::uint32_t group, cluster::ReconcileReason r) {
    record(ev(Ev::Reconcile, s.id, peer.id, (static_cast<std::uint64_t>(r) << 32) | group));
}

void World::on_fence(ServerId s) { record(ev(Ev::Fence, s.id)); }

void World::on_ready(ServerId s) { record(ev(Ev::Ready, s.id)); }

void World::on_peer_state(ServerId s, ServerId peer, bool up) {
    record(ev(up ? Ev::PeerUp : Ev::PeerDown, s.id, peer.id));
}

}  // namespace migrant::simnet
