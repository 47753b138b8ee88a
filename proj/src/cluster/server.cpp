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

#include "migrant/cluster/server.hpp"

#include <algorithm>
#include <charconv>

#include <spdlog/spdlog.h>

namespace migrant::cluster {

namespace {

std::string coord_key(GroupId g) { return "coord/" + std::to_string(g.index); }
std::string epoch_key(GroupId g) { return "epoch/" + std::to_string(g.index); }

std::optional<ServerId> parse_server(const std::string& s) {
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return ServerId{v};
}

std::size_t approx_size(const Message& m) { return m.payload.size() + m.topic.str().size() + 48; }

}  // namespace

const char* reason_name(ReconcileReason r) noexcept {
    switch (r) {
        case ReconcileReason::Gap: return "gap";
        case ReconcileReason::LinkUp: return "link-up";
        case ReconcileReason::Takeover: return "takeover";
        case ReconcileReason::Restart: return "restart";
        case ReconcileReason::Unfence: return "unfence";
    }
    return "?";
}

Server::Server(ServerConfig config, engine::Engine& engine, PeerSend send, ClusterObserver* observer)
    : config_(std::move(config)),
      engine_(engine),
      exec_(*engine.runtime().control),
      clock_(*engine.runtime().clock),
      send_(std::move(send)),
      observer_(observer),
      rng_(config_.seed) {
    if (config_.servers.empty()) config_.servers.push_back(config_.self);
    std::sort(config_.servers.begin(), config_.servers.end());
    config_.servers.erase(std::unique(config_.servers.begin(), config_.servers.end()), config_.servers.end());
    if (!std::binary_search(config_.servers.begin(), config_.servers.end(), config_.self)) {
        throw InvalidArgument("server list does not contain self");
    }
    if (config_.servers.size() == 2) throw InvalidArgument("replication needs at least three servers");
    for (auto s : config_.servers)
        if (s != config_.self) peers_[s] = Peer{};
    if (replicated()) {
        auto kc = config_.kv;
        kc.self = config_.self;
        kc.members = config_.servers;
        kc.rejoining = config_.restarted;
        kc.seed = config_.seed ^ 0x9e3779b97f4a7c15ULL;
        kv_ = std::make_unique<coordkv::Node>(kc, exec_, clock_, [this](ServerId to, Bytes b) {
            this->send(to, wire::Kv{std::string(b.begin(), b.end())});
        });
    }
}

Server::~Server() = default;

void Server::post_after(rt::Duration d, std::function<void()> fn) {
    std::weak_ptr<int> alive = alive_;
    exec_.post_after(d, [alive, fn = std::move(fn)] {
        if (alive.lock()) fn();
    });
}

void Server::start() {
    started_ = clock_.now();
    engine_.set_publication_handler(this);
    if (!replicated()) return;
    if (config_.restarted) {
        rebuilding_ = true;
        engine_.set_accepting(false);
    }
    kv_->start();
    for (std::uint32_t g = 0; g < engine_.cache().num_groups(); ++g) watch_coord(GroupId{g});
    post_after(config_.tick, [this] { tick(); });
}

void Server::tick() {
    const auto now = clock_.now();
    update_peers(now);
    check_fence(now);
    maybe_rebuild(now);
    check_ownership();
    check_elections(now);
    retransmit(now);
    expire_contacts(now);
    retry_requests(now);
    post_after(config_.tick, [this] { tick(); });
}

void Server::send(ServerId to, const wire::Frame& f) { send_(to, f); }

std::vector<ServerId> Server::peers() const {
    std::vector<ServerId> out;
    for (const auto& [id, p] : peers_) out.push_back(id);
    return out;
}

std::vector<ServerId> Server::up_peers() const {
    std::vector<ServerId> out;
    for (const auto& [id, p] : peers_)
        if (p.up) out.push_back(id);
    return out;
}

bool Server::peer_up(ServerId peer) const {
    auto it = peers_.find(peer);
    return it != peers_.end() && it->second.up;
}

OrderKey Server::local_last(const TopicName& t) const {
    auto last = engine_.cache().last_key(t).value_or(OrderKey{});
    return std::max(last, engine_.cache().evicted_upto(t));
}

bool Server::coordinates(GroupId g) const {
    auto it = owned_.find(g);
    return it != owned_.end() && it->second.ready;
}

std::optional<std::uint64_t> Server::epoch_of(GroupId g) const {
    auto it = owned_.find(g);
    if (it == owned_.end()) return std::nullopt;
    return it->second.epoch;
}

std::optional<ServerId> Server::gossip(GroupId g) const {
    auto it = gossip_.find(g);
    if (it == gossip_.end()) return std::nullopt;
    return it->second.server;
}

// ---------------------------------------------------------------------------
// Publication path

void Server::on_client_publish(engine::ConnectionId conn, wire::Publish publish) {
    if (!replicated()) {
        publish_single(conn, publish);
        return;
    }
    if (!serving()) return;
    route(Queued{Origin{conn, std::nullopt}, std::move(publish)});
}

void Server::publish_single(engine::ConnectionId conn, const wire::Publish& p) {
    auto& seq = single_seq_[p.topic];
    if (seq == 0) {
        auto last = engine_.cache().last_key(p.topic).value_or(OrderKey{});
        seq = last.epoch == 1 ? last.seq : 0;
    }
    Message m{p.topic, OrderKey{1, ++seq}, p.payload, p.msg_id};
    ++stats_.assigned;
    if (observer_) observer_->on_assign(config_.self, group_of(p.topic), m);
    apply(m);
    if (p.ack_requested) send_puback(conn, m);
}

void Server::route(Queued q) {
    const auto g = group_of(q.publish.topic);
    if (owned_.count(g)) {
        if (owned_[g].ready) {
            assign(g, std::move(q));
        } else {
            waiting_[g].push_back(std::move(q));
        }
        return;
    }
    if (elections_.count(g)) {
        waiting_[g].push_back(std::move(q));
        return;
    }
    std::optional<ServerId> target;
    if (auto it = gossip_.find(g); it != gossip_.end() && peer_up(it->second.server)) target = it->second.server;
    if (!target) {
        auto owner = kv_owner(g);
        if (owner == config_.self) {
            waiting_[g].push_back(std::move(q));
            run_for_coordinator(g);
            return;
        }
        if (owner && peer_up(*owner)) target = owner;
    }
    if (!target) {
        auto up = up_peers();
        if (up.empty()) {
            answer_nack(q.origin, q.publish.msg_id, q.publish.ack_requested, wire::NackReason::Unavailable);
            return;
        }
        target = up[std::uniform_int_distribution<std::size_t>(0, up.size() - 1)(rng_)];
    }
    ++stats_.forwarded;
    if (q.publish.ack_requested && q.origin.conn) {
        contacts_[q.publish.msg_id] = Contact{*q.origin.conn, *target, g, clock_.now() + config_.t_pub};
    }
    send(*target, q.publish);
}

void Server::assign(GroupId g, Queued q) {
    auto& own = owned_.at(g);
    if (!kv_->owns(coord_key(g))) {
        abandon(g);
        answer_nack(q.origin, q.publish.msg_id, q.publish.ack_requested, wire::NackReason::NotCoordinator);
        return;
    }
    auto& seq = own.seq[q.publish.topic];
    if (seq == 0) {
        auto last = engine_.cache().last_key(q.publish.topic).value_or(OrderKey{});
        seq = last.epoch == own.epoch ? last.seq : 0;
    }
    Message m{q.publish.topic, OrderKey{own.epoch, ++seq}, std::move(q.publish.payload), q.publish.msg_id};
    ++stats_.assigned;
    if (observer_) observer_->on_assign(config_.self, g, m);
    apply(m);
    Inflight inf{m, std::nullopt, false, {}, clock_.now() + config_.replicate_retry};
    if (q.origin.conn && q.publish.ack_requested) inf.conn = q.origin.conn;
    for (auto peer : peers()) {
        send(peer, wire::Replicate{m});
        if (peer_up(peer)) inf.unacked.insert(peer);
    }
    if (inf.unacked.empty()) {
        if (inf.conn) answer_nack(q.origin, m.publisher_msg_id, true, wire::NackReason::Unavailable);
        return;
    }
    inflight_[{m.topic, m.key}] = std::move(inf);
}

void Server::answer_nack(const Origin& o, const MsgId& id, bool ack_requested, wire::NackReason reason,
                         ServerId hint) {
    if (o.peer) {
        send(*o.peer, wire::PubNack{id, reason, hint});
        return;
    }
    if (!o.conn || !ack_requested) return;
    ++stats_.pubnacks;
    if (observer_) observer_->on_pubnack(config_.self, id, reason);
    engine_.send(*o.conn, wire::PubNack{id, reason, hint});
}

void Server::send_puback(engine::ConnectionId conn, const Message& m) {
    ++stats_.pubacks;
    if (observer_) observer_->on_puback(config_.self, m);
    engine_.send(conn, wire::PubAck{m.publisher_msg_id});
}

void Server::on_forwarded(ServerId from, wire::Publish p) {
    const auto g = group_of(p.topic);
    Queued q{Origin{std::nullopt, from}, std::move(p)};
    if (!serving()) {
        answer_nack(q.origin, q.publish.msg_id, true, wire::NackReason::Unavailable);
        return;
    }
    if (owned_.count(g) || elections_.count(g)) {
        route(std::move(q));
        return;
    }
    auto owner = kv_owner(g);
    if (owner && *owner != config_.self) {
        answer_nack(q.origin, q.publish.msg_id, true, wire::NackReason::NotCoordinator, *owner);
        return;
    }
    waiting_[g].push_back(std::move(q));
    run_for_coordinator(g);
}

void Server::on_pubnack(ServerId from, const wire::PubNack& n) {
    auto it = contacts_.find(n.msg_id);
    if (it == contacts_.end() || it->second.target != from) return;
    auto c = it->second;
    contacts_.erase(it);
    if (n.coordinator_hint.id != ServerId::kNone && n.coordinator_hint != config_.self) {
        gossip_[c.group] = GossipEntry{n.coordinator_hint, 0};
    } else if (auto g = gossip_.find(c.group); g != gossip_.end() && g->second.server == from) {
        gossip_.erase(g);
    }
    answer_nack(Origin{c.conn, std::nullopt}, n.msg_id, true, n.reason, n.coordinator_hint);
}

void Server::expire_contacts(rt::TimePoint now) {
    for (auto it = contacts_.begin(); it != contacts_.end();) {
        if (it->second.deadline > now) {
            ++it;
            continue;
        }
        auto c = it->second;
        auto id = it->first;
        it = contacts_.erase(it);
        if (auto g = gossip_.find(c.group); g != gossip_.end() && g->second.server == c.target) gossip_.erase(g);
        answer_nack(Origin{c.conn, std::nullopt}, id, true, wire::NackReason::Timeout);
    }
}

void Server::on_repl_ack(ServerId from, const wire::ReplAck& a) {
    auto it = inflight_.find({a.topic, a.key});
    if (it == inflight_.end()) return;
    auto& inf = it->second;
    if (!inf.unacked.erase(from)) return;
    if (!inf.acked) {
        inf.acked = true;
        if (inf.conn) send_puback(*inf.conn, inf.message);
    }
    if (inf.unacked.empty()) inflight_.erase(it);
}

void Server::retransmit(rt::TimePoint now) {
    for (auto it = inflight_.begin(); it != inflight_.end();) {
        auto& inf = it->second;
        for (auto p = inf.unacked.begin(); p != inf.unacked.end();) {
            if (!peer_up(*p)) {
                p = inf.unacked.erase(p);
            } else {
                ++p;
            }
        }
        if (inf.unacked.empty()) {
            it = inflight_.erase(it);
            continue;
        }
        if (inf.next_retry <= now) {
            for (auto p : inf.unacked) {
                ++stats_.retransmits;
                send(p, wire::Replicate{inf.message});
            }
            inf.next_retry = now + config_.replicate_retry;
        }
        ++it;
    }
}

void Server::on_replicate(ServerId from, Message m) {
    // Unacknowledged; the coordinator retransmits after the cache is rebuilt.
    if (fenced_ && !unfencing_) return;
    const auto g = group_of(m.topic);
    if (gap_jobs_.count(g)) {
        held_[g].emplace_back(from, std::move(m));
        return;
    }
    const auto last = local_last(m.topic);
    if (m.key <= last) {
        ack_if_cached(from, m);
        return;
    }
    const bool in_order =
        (last.is_none() && m.key.seq == 1) || (m.key.epoch == last.epoch && m.key.seq == last.seq + 1);
    if (in_order) {
        apply(m);
        send(from, wire::ReplAck{m.topic, m.key});
        return;
    }
    ++stats_.gaps;
    if (observer_) observer_->on_gap(config_.self, from, m);
    held_[g].emplace_back(from, std::move(m));
    start_gap(g, from);
}

void Server::apply(const Message& m) {
    if (!engine_.append_and_deliver(m)) return;
    if (observer_) observer_->on_append(config_.self, m);
    auto it = contacts_.find(m.publisher_msg_id);
    if (it == contacts_.end()) return;
    auto conn = it->second.conn;
    contacts_.erase(it);
    send_puback(conn, m);
}

void Server::ack_if_cached(ServerId to, const Message& m) {
    auto last = engine_.cache().last_key(m.topic);
    if (!last || m.key > *last || m.key <= engine_.cache().evicted_upto(m.topic)) return;
    send(to, wire::ReplAck{m.topic, m.key});
}

// ---------------------------------------------------------------------------
// Coordination

std::optional<ServerId> Server::kv_owner(GroupId g) const {
    auto e = kv_->get(coord_key(g));
    if (!e || !e->ephemeral_owner) return std::nullopt;
    return parse_server(e->value);
}

void Server::watch_coord(GroupId g) {
    kv_->watch(coord_key(g), [this, g](const coordkv::WatchEvent& ev) {
        on_coord_event(g, ev);
        watch_coord(g);
    });
}

void Server::on_coord_event(GroupId g, const coordkv::WatchEvent& ev) {
    if (ev.type != coordkv::EventType::Deleted && ev.entry) {
        auto owner = parse_server(ev.entry->value);
        if (owner && *owner != config_.self) gossip_[g] = GossipEntry{*owner, gossip_[g].epoch};
        return;
    }
    if (auto it = gossip_.find(g); it != gossip_.end() && it->second.server != config_.self) gossip_.erase(it);
    if (owned_.count(g)) abandon(g);
    if (fenced_ || rebuilding_) return;
    const auto jitter = std::uniform_int_distribution<std::int64_t>(0, config_.takeover_jitter.count())(rng_);
    post_after(rt::Duration(jitter), [this, g] {
        if (fenced_ || rebuilding_ || owned_.count(g) || elections_.count(g) || kv_->get(coord_key(g))) return;
        run_for_coordinator(g);
    });
}

void Server::run_for_coordinator(GroupId g) {
    if (elections_.count(g)) return;
    if (!kv_->local_write_available() || kv_->session_state() != coordkv::SessionState::Live) {
        lost(g, kv_owner(g), wire::NackReason::Unavailable);
        return;
    }
    const auto attempt = ++election_attempts_;
    elections_[g] = Election{clock_.now() + config_.t_pub, attempt};
    const auto session = *kv_->session();
    kv_->create_ephemeral(coord_key(g), std::to_string(config_.self.id), session,
                          [this, g, attempt, session](coordkv::Result r) {
                              auto it = elections_.find(g);
                              if (it == elections_.end() || it->second.attempt != attempt) return;
                              auto e = kv_->get(coord_key(g));
                              const bool mine = e && e->ephemeral_owner == session;
                              if (fenced_ || !(r.status == coordkv::Status::Created ||
                                               (r.status == coordkv::Status::AlreadyExists && mine))) {
                                  lost(g, kv_owner(g), wire::NackReason::ElectionLost);
                                  return;
                              }
                              auto cur = kv_->get(epoch_key(g));
                              claim_epoch(g, attempt, cur ? coordkv::parse_counter(cur->value) : 0);
                          });
}

void Server::claim_epoch(GroupId g, std::uint64_t attempt, std::uint64_t expected) {
    kv_->cas_counter(epoch_key(g), expected, expected + 1, [this, g, attempt](coordkv::Result r) {
        auto it = elections_.find(g);
        if (it == elections_.end() || it->second.attempt != attempt) return;
        if (fenced_ || !kv_->owns(coord_key(g))) {
            lost(g, kv_owner(g), wire::NackReason::ElectionLost);
            return;
        }
        if (r.status == coordkv::Status::Ok) {
            won(g, r.current);
        } else if (r.status == coordkv::Status::Conflict) {
            claim_epoch(g, attempt, r.current);
        } else {
            lost(g, kv_owner(g), wire::NackReason::ElectionLost);
        }
    });
}

void Server::won(GroupId g, std::uint64_t epoch) {
    elections_.erase(g);
    owned_[g] = Owned{epoch, false, {}};
    gossip_[g] = GossipEntry{config_.self, epoch};
    ++stats_.elections_won;
    if (observer_) observer_->on_won(config_.self, g, epoch);
    spdlog::debug("server {} coordinates group {} at epoch {}", config_.self.id, g.index, epoch);
    start_job(ReconcileReason::Takeover, g.index, up_peers(), [this, g, epoch](Job& job) {
        auto it = owned_.find(g);
        if (it == owned_.end() || it->second.epoch != epoch) return;
        rebroadcast_tail(g, job);
        it->second.ready = true;
        for (auto peer : peers()) send(peer, wire::CoordGossip{g, config_.self, epoch});
        drain(g);
    });
}

void Server::lost(GroupId g, std::optional<ServerId> owner, wire::NackReason reason) {
    elections_.erase(g);
    if (observer_) observer_->on_lost(config_.self, g);
    if (owner && *owner != config_.self) gossip_[g] = GossipEntry{*owner, 0};
    auto waiting = std::move(waiting_[g]);
    waiting_.erase(g);
    const ServerId hint = owner && *owner != config_.self ? *owner : ServerId{ServerId::kNone};
    for (auto& q : waiting) answer_nack(q.origin, q.publish.msg_id, q.publish.ack_requested, reason, hint);
}

void Server::abandon(GroupId g) {
    owned_.erase(g);
    if (auto it = gossip_.find(g); it != gossip_.end() && it->second.server == config_.self) gossip_.erase(it);
    auto waiting = std::move(waiting_[g]);
    waiting_.erase(g);
    for (auto& q : waiting) {
        answer_nack(q.origin, q.publish.msg_id, q.publish.ack_requested, wire::NackReason::NotCoordinator);
    }
}

void Server::drain(GroupId g) {
    auto waiting = std::move(waiting_[g]);
    waiting_.erase(g);
    for (auto& q : waiting) {
        if (!coordinates(g)) {
            answer_nack(q.origin, q.publish.msg_id, q.publish.ack_requested, wire::NackReason::NotCoordinator);
            continue;
        }
        assign(g, std::move(q));
    }
}

void Server::check_ownership() {
    std::vector<GroupId> gone;
    for (const auto& [g, own] : owned_)
        if (!kv_->owns(coord_key(g))) gone.push_back(g);
    for (auto g : gone) {
        spdlog::debug("server {} lost group {}", config_.self.id, g.index);
        abandon(g);
    }
}

void Server::check_elections(rt::TimePoint now) {
    for (auto& [g, el] : elections_) {
        if (el.deadline > now) continue;
        el.deadline = now + config_.t_pub;
        auto waiting = std::move(waiting_[g]);
        waiting_.erase(g);
        for (auto& q : waiting) {
            answer_nack(q.origin, q.publish.msg_id, q.publish.ack_requested, wire::NackReason::Timeout);
        }
    }
}

// ---------------------------------------------------------------------------
// Reconciliation

std::uint64_t Server::start_job(ReconcileReason reason, std::uint32_t group, const std::vector<ServerId>& peers,
                                std::function<void(Job&)> done) {
    const auto id = next_job_++;
    auto& job = jobs_[id];
    job.reason = reason;
    job.group = group;
    job.done = std::move(done);
    for (auto p : peers) {
        if (observer_) observer_->on_reconcile(config_.self, p, group, reason);
        send_request(id, p);
    }
    if (job.waiting.empty()) complete_job(id);
    return id;
}

void Server::send_request(std::uint64_t job_id, ServerId peer) {
    auto& job = jobs_.at(job_id);
    const auto id = next_request_++;
    Request req{job_id, peer, {}, clock_.now(), {}};
    wire::ReconcileReq frame{id, job.group, {}};
    auto add = [&](GroupId g) {
        for (auto& [topic, head] : engine_.cache().heads(g)) {
            auto k = std::max(head, engine_.cache().evicted_upto(topic));
            req.known[topic] = k;
            frame.known.push_back(wire::TopicKey{topic, k});
        }
    };
    if (job.group == wire::kAllGroups) {
        for (std::uint32_t g = 0; g < engine_.cache().num_groups(); ++g) add(GroupId{g});
    } else {
        add(GroupId{job.group});
    }
    job.waiting.insert(peer);
    requests_[id] = std::move(req);
    ++stats_.reconcile_requests;
    send(peer, frame);
}

void Server::on_reconcile_req(ServerId from, const wire::ReconcileReq& req) {
    auto& cache = engine_.cache();
    if (req.group != wire::kAllGroups && req.group >= cache.num_groups()) return;
    std::unordered_map<TopicName, OrderKey> known;
    for (const auto& k : req.known) known[k.topic] = k.key;

    wire::ReconcileRsp chunk{req.request_id, req.group, false, {}, {}, {}};
    std::size_t bytes = 0;
    auto flush = [&](bool last) {
        chunk.last_chunk = last;
        send(from, chunk);
        chunk.messages.clear();
        chunk.heads.clear();
        chunk.truncated.clear();
        bytes = 0;
    };
    auto visit = [&](GroupId g) {
        std::vector<Message> msgs;
        std::vector<wire::TopicKey> heads, truncated;
        cache.for_each_topic(g, [&](const TopicName& topic, const std::deque<Message>& hist, OrderKey evicted) {
            OrderKey after;
            if (auto it = known.find(topic); it != known.end()) after = it->second;
            if (!hist.empty()) heads.push_back(wire::TopicKey{topic, hist.back().key});
            if (evicted > after) truncated.push_back(wire::TopicKey{topic, evicted});
            auto first = std::upper_bound(hist.begin(), hist.end(), after,
                                          [](OrderKey k, const Message& m) { return k < m.key; });
            msgs.insert(msgs.end(), first, hist.end());
        });
        for (auto& h : heads) {
            bytes += h.topic.str().size() + 24;
            chunk.heads.push_back(std::move(h));
        }
        for (auto& t : truncated) {
            bytes += t.topic.str().size() + 24;
            chunk.truncated.push_back(std::move(t));
        }
        for (auto& m : msgs) {
            bytes += approx_size(m);
            chunk.messages.push_back(std::move(m));
            if (bytes >= config_.reconcile_chunk_bytes) flush(false);
        }
        if (bytes >= config_.reconcile_chunk_bytes) flush(false);
    };
    if (req.group == wire::kAllGroups) {
        for (std::uint32_t g = 0; g < cache.num_groups(); ++g) visit(GroupId{g});
    } else {
        visit(GroupId{req.group});
    }
    flush(true);
}

void Server::on_reconcile_rsp(ServerId from, wire::ReconcileRsp rsp) {
    auto it = requests_.find(rsp.request_id);
    if (it == requests_.end() || it->second.peer != from) return;
    auto& req = it->second;
    auto job_it = jobs_.find(req.job);
    if (job_it == jobs_.end()) {
        requests_.erase(it);
        return;
    }
    auto& job = job_it->second;
    for (auto& m : rsp.messages) req.messages.push_back(std::move(m));
    auto& heads = job.heads[from];
    for (auto& h : rsp.heads) heads[h.topic] = h.key;
    std::map<TopicName, OrderKey> truncated;
    for (auto& t : rsp.truncated) {
        truncated[t.topic] = t.key;
        job.horizons[t.topic].push_back(t.key);
    }
    for (auto& h : rsp.heads)
        if (!truncated.count(h.topic)) job.horizons[h.topic].push_back(OrderKey{});
    if (!rsp.last_chunk) return;

    // A lost chunk shows up as a head newer than anything received for that topic.
    std::map<TopicName, OrderKey> newest;
    for (const auto& m : req.messages) newest[m.topic] = std::max(newest[m.topic], m.key);
    bool complete = true;
    for (const auto& [topic, head] : heads) {
        OrderKey k;
        if (auto kn = req.known.find(topic); kn != req.known.end()) k = kn->second;
        if (head > k && newest[topic] != head) complete = false;
    }
    const auto job_id = req.job;
    if (!complete) {
        spdlog::warn("server {}: incomplete reconcile answer from {}, asking again", config_.self.id, from.id);
        requests_.erase(it);
        job.waiting.erase(from);
        job.heads.erase(from);
        send_request(job_id, from);
        return;
    }
    for (auto& m : req.messages) job.messages.push_back(std::move(m));
    requests_.erase(it);
    finish_response(job_id, from);
}

void Server::finish_response(std::uint64_t job_id, ServerId peer) {
    auto& job = jobs_.at(job_id);
    job.answered.insert(peer);
    job.waiting.erase(peer);
    if (job.waiting.empty()) complete_job(job_id);
}

void Server::retry_requests(rt::TimePoint now) {
    std::vector<std::uint64_t> stale;
    for (const auto& [id, req] : requests_)
        if (now - req.sent_at >= config_.t_timeout && peer_up(req.peer)) stale.push_back(id);
    for (auto id : stale) {
        auto req = std::move(requests_.at(id));
        requests_.erase(id);
        if (!jobs_.count(req.job)) continue;
        send_request(req.job, req.peer);
    }
}

void Server::peer_failed_for_jobs(ServerId peer) {
    std::set<std::uint64_t> touched;
    for (auto it = requests_.begin(); it != requests_.end();) {
        if (it->second.peer == peer) {
            touched.insert(it->second.job);
            it = requests_.erase(it);
        } else {
            ++it;
        }
    }
    for (auto id : touched) {
        auto jt = jobs_.find(id);
        if (jt == jobs_.end()) continue;
        auto& job = jt->second;
        job.waiting.erase(peer);
        job.heads.erase(peer);
        if (!job.waiting.empty()) continue;
        if (job.reason == ReconcileReason::Gap && job.answered.empty()) {
            for (auto p : up_peers()) {
                if (observer_) observer_->on_reconcile(config_.self, p, job.group, job.reason);
                send_request(id, p);
            }
            if (!jobs_.at(id).waiting.empty()) continue;
        }
        complete_job(id);
    }
}

void Server::complete_job(std::uint64_t job_id) {
    auto node = jobs_.extract(job_id);
    if (node.empty()) return;
    auto& job = node.mapped();
    merge(job);
    if (job.done) job.done(job);
}

void Server::merge(Job& job) {
    auto& cache = engine_.cache();
    for (const auto& [topic, points] : job.horizons) {
        auto marker = *std::min_element(points.begin(), points.end());
        if (marker > local_last(topic)) cache.mark_truncated(topic, marker);
    }
    auto& msgs = job.messages;
    std::sort(msgs.begin(), msgs.end(), [](const Message& a, const Message& b) {
        return a.topic < b.topic || (a.topic == b.topic && a.key < b.key);
    });
    for (const auto& m : msgs)
        if (m.key > local_last(m.topic)) apply(m);
}

void Server::start_gap(GroupId g, ServerId from) {
    if (!gap_jobs_.insert(g).second) return;
    start_job(ReconcileReason::Gap, g.index, {from}, [this, g](Job&) {
        gap_jobs_.erase(g);
        release_held(g);
    });
}

void Server::release_held(GroupId g) {
    auto held = std::move(held_[g]);
    held_.erase(g);
    std::stable_sort(held.begin(), held.end(), [](const auto& a, const auto& b) {
        return a.second.topic < b.second.topic || (a.second.topic == b.second.topic && a.second.key < b.second.key);
    });
    for (const auto& [from, m] : held) {
        if (m.key > local_last(m.topic)) apply(m);
        ack_if_cached(from, m);
    }
}

void Server::rebroadcast_tail(GroupId g, const Job& job) {
    for (const auto& [peer, heads] : job.heads) {
        std::vector<Message> tail;
        engine_.cache().for_each_topic(g, [&](const TopicName& topic, const std::deque<Message>& hist, OrderKey) {
            OrderKey after;
            if (auto it = heads.find(topic); it != heads.end()) after = it->second;
            for (const auto& m : hist)
                if (m.key > after) tail.push_back(m);
        });
        for (auto& m : tail) send(peer, wire::Replicate{std::move(m)});
    }
}

// ---------------------------------------------------------------------------
// Liveness and fencing

void Server::update_peers(rt::TimePoint now) {
    for (auto& [id, p] : peers_) {
        if (now - p.last_ping >= config_.ping_interval) {
            p.last_ping = now;
            send(id, wire::Ping{});
        }
        if (p.up && now - p.last_heard >= config_.t_timeout) {
            p.up = false;
            peer_up_changed(id, false);
        }
    }
}

void Server::peer_up_changed(ServerId peer, bool up) {
    spdlog::debug("server {}: peer {} {}", config_.self.id, peer.id, up ? "up" : "down");
    if (observer_) observer_->on_peer_state(config_.self, peer, up);
    if (!up) {
        peer_failed_for_jobs(peer);
        return;
    }
    if (rebuilding_ || unfencing_ || fenced_) return;
    start_job(ReconcileReason::LinkUp, wire::kAllGroups, {peer}, {});
}

void Server::check_fence(rt::TimePoint now) {
    if (fenced_) {
        if (!unfencing_ && !up_peers().empty() && kv_->local_write_available()) unfence();
        return;
    }
    std::size_t timed_out = 0;
    for (const auto& [id, p] : peers_) {
        if (p.up) continue;
        if (p.ever_heard || now - started_ >= config_.t_timeout) ++timed_out;
    }
    if (timed_out >= std::min<std::size_t>(2, peers_.size()) && !kv_->local_write_available()) fence();
}

void Server::fence() {
    spdlog::warn("server {} fenced: peers unreachable and coordination unavailable", config_.self.id);
    fenced_ = true;
    ++stats_.fences;
    if (observer_) observer_->on_fence(config_.self);
    engine_.set_accepting(false);
    engine_.close_all_clients(wire::CloseReason::Fenced);
    std::vector<GroupId> owned;
    for (const auto& [g, o] : owned_) owned.push_back(g);
    for (auto g : owned) abandon(g);
    std::vector<GroupId> electing;
    for (const auto& [g, e] : elections_) electing.push_back(g);
    for (auto g : electing) lost(g, std::nullopt, wire::NackReason::Unavailable);
    inflight_.clear();
    contacts_.clear();
    drop_jobs();
}

void Server::drop_jobs() {
    jobs_.clear();
    requests_.clear();
    gap_jobs_.clear();
    held_.clear();
    rebuild_started_ = false;
}

void Server::unfence() {
    unfencing_ = true;
    drop_jobs();
    engine_.cache().clear();
    // Rebuilds every group, so it also completes a restart rebuild.
    start_job(ReconcileReason::Unfence, wire::kAllGroups, up_peers(), [this](Job&) {
        fenced_ = false;
        unfencing_ = false;
        rebuilding_ = false;
        engine_.set_accepting(true);
        if (observer_) observer_->on_ready(config_.self);
    });
}

void Server::maybe_rebuild(rt::TimePoint now) {
    if (!rebuilding_ || rebuild_started_ || fenced_) return;
    auto up = up_peers();
    if (up.empty()) return;
    if (up.size() < peers_.size() && now - started_ < config_.t_timeout) return;
    rebuild_started_ = true;
    start_job(ReconcileReason::Restart, wire::kAllGroups, up, [this](Job&) {
        rebuilding_ = false;
        if (!fenced_) {
            engine_.set_accepting(true);
            if (observer_) observer_->on_ready(config_.self);
        }
    });
}

// ---------------------------------------------------------------------------
// Peer frames

void Server::on_peer_frame(ServerId from, wire::Frame frame) {
    auto pit = peers_.find(from);
    if (pit == peers_.end()) {
        spdlog::warn("server {}: frame from unknown server {}", config_.self.id, from.id);
        return;
    }
    auto& peer = pit->second;
    peer.last_heard = clock_.now();
    peer.ever_heard = true;
    if (!peer.up) {
        peer.up = true;
        peer_up_changed(from, true);
    }
    std::visit(
        [&](auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wire::Kv>) {
                kv_->on_message(from, std::span(reinterpret_cast<const std::uint8_t*>(f.body.data()), f.body.size()));
            } else if constexpr (std::is_same_v<T, wire::Ping>) {
                send(from, wire::Pong{});
            } else if constexpr (std::is_same_v<T, wire::Pong>) {
            } else if constexpr (std::is_same_v<T, wire::Publish>) {
                on_forwarded(from, std::move(f));
            } else if constexpr (std::is_same_v<T, wire::PubNack>) {
                on_pubnack(from, f);
            } else if constexpr (std::is_same_v<T, wire::Replicate>) {
                on_replicate(from, std::move(f.message));
            } else if constexpr (std::is_same_v<T, wire::ReplAck>) {
                on_repl_ack(from, f);
            } else if constexpr (std::is_same_v<T, wire::CoordGossip>) {
                if (f.coordinator != config_.self && !owned_.count(f.group)) {
                    auto& e = gossip_[f.group];
                    if (f.epoch >= e.epoch) e = GossipEntry{f.coordinator, f.epoch};
                }
            } else if constexpr (std::is_same_v<T, wire::ReconcileReq>) {
                on_reconcile_req(from, f);
            } else if constexpr (std::is_same_v<T, wire::ReconcileRsp>) {
                on_reconcile_rsp(from, std::move(f));
            } else {
                spdlog::warn("server {}: unexpected {} from server {}", config_.self.id,
                             wire::kind_name(wire::kind_of(wire::Frame{f})), from.id);
            }
        },
        frame);
}

}  // namespace migrant::cluster
