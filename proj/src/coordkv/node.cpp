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

#include "migrant/coordkv/node.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace migrant::coordkv {

namespace {
constexpr std::size_t kMaxEntriesPerAppend = 64;
}

Node::Node(NodeConfig config, rt::Executor& exec, rt::Clock& clock, SendFn send)
    : config_(std::move(config)),
      exec_(exec),
      clock_(clock),
      send_fn_(std::move(send)),
      rng_(config_.seed * 0x9e3779b97f4a7c15ULL + config_.self.id),
      incarnation_(rng_()) {
    if (std::find(config_.members.begin(), config_.members.end(), config_.self) == config_.members.end())
        throw InvalidArgument("kv members must include self");
    log_.push_back({});
    voter_ = !config_.rejoining;
}

Node::~Node() = default;

void Node::post_guarded(rt::Duration d, std::function<void()> fn) {
    std::weak_ptr<int> alive = alive_;
    auto task = [alive, fn = std::move(fn)] {
        if (!alive.expired()) fn();
    };
    if (d == rt::Duration::zero())
        exec_.post(std::move(task));
    else
        exec_.post_after(d, std::move(task));
}

void Node::defer(std::function<void()> fn) { post_guarded(rt::Duration::zero(), std::move(fn)); }

void Node::start() {
    reset_election_deadline();
    open_new_session();
    schedule_tick();
}

void Node::schedule_tick() {
    post_guarded(config_.tick, [this] { tick(); });
}

rt::Duration Node::lease() const {
    return std::chrono::duration_cast<rt::Duration>(config_.session_timeout * config_.owner_lease_fraction);
}

void Node::tick() {
    const auto now = clock_.now();
    if (role_ == Role::Leader) {
        if (!quorum_recent()) {
            spdlog::debug("kv {}: leader lost quorum in term {}", config_.self.id, term_);
            become_follower(term_);
        } else {
            if (now - last_heartbeat_ >= config_.heartbeat) broadcast_append();
            leader_session_checks();
        }
    } else if (voter_ && now >= election_deadline_) {
        start_pre_vote();
    }
    resend_pending(false);
    if (session_open_ && now - last_keepalive_ >= config_.keepalive_interval) send_keepalive();
    notify_session_state();
    schedule_tick();
}

// ---------------------------------------------------------------- requests

void Node::submit(Op op, Callback cb) {
    Command cmd{config_.self.id, incarnation_, next_req_++, std::move(op)};
    const auto id = cmd.req_id;
    auto& p = pending_[id];
    p.cmd = std::move(cmd);
    p.cb = std::move(cb);
    send_pending(p);
}

void Node::resend_pending(bool all) {
    // Sending may apply commands synchronously and erase entries; walk a snapshot.
    std::vector<std::uint64_t> ids;
    for (const auto& [id, p] : pending_) ids.push_back(id);
    const auto now = clock_.now();
    for (auto id : ids) {
        auto it = pending_.find(id);
        if (it == pending_.end()) continue;
        if (all || !it->second.sent || now - it->second.last_sent >= config_.retry_interval) send_pending(it->second);
    }
}

void Node::send_pending(Pending& p) {
    p.sent = true;
    p.last_sent = clock_.now();
    if (role_ == Role::Leader) {
        auto cmd = p.cmd;  // `p` may be erased once the command applies
        propose(std::move(cmd));
    } else if (leader_) {
        send(*leader_, proto::Forward{p.cmd});
    } else {
        p.sent = false;
    }
}

void Node::create_ephemeral(const std::string& key, const std::string& value, Callback cb) {
    if (!session_ || session_state() != SessionState::Live) {
        defer([cb = std::move(cb)] { cb({Status::SessionExpired, 0}); });
        return;
    }
    create_ephemeral(key, value, *session_, std::move(cb));
}

void Node::create_ephemeral(const std::string& key, const std::string& value, SessionId session, Callback cb) {
    submit(CreateEphemeral{key, value, session}, std::move(cb));
}

void Node::delete_ephemeral(const std::string& key, Callback cb) {
    if (!session_) {
        defer([cb = std::move(cb)] { cb({Status::NotOwner, 0}); });
        return;
    }
    // Ownership ends when the delete is issued, not when it is applied here.
    ++releasing_[key];
    submit(DeleteEphemeral{key, *session_}, [this, key, cb = std::move(cb)](Result r) {
        if (auto it = releasing_.find(key); it != releasing_.end() && --it->second == 0) releasing_.erase(it);
        if (cb) cb(r);
    });
}

void Node::cas_counter(const std::string& key, std::uint64_t expected, std::uint64_t desired, Callback cb) {
    if (desired <= expected) throw InvalidArgument("cas_counter requires desired > expected");
    submit(CasCounter{key, expected, desired}, std::move(cb));
}

void Node::expire_session(SessionId session, Callback cb) { submit(ExpireSession{session}, std::move(cb)); }

Node::WatchId Node::watch(const std::string& key, WatchFn fn) {
    auto id = next_watch_++;
    watches_.emplace(key, std::make_pair(id, std::move(fn)));
    return id;
}

void Node::unwatch(WatchId id) {
    for (auto it = watches_.begin(); it != watches_.end(); ++it) {
        if (it->second.first == id) {
            watches_.erase(it);
            return;
        }
    }
}

// ---------------------------------------------------------------- messaging

void Node::send(ServerId to, const proto::Message& m) { send_fn_(to, proto::encode(m)); }

void Node::on_message(ServerId from, std::span<const std::uint8_t> bytes) {
    proto::Message m;
    try {
        m = proto::decode(bytes);
    } catch (const std::exception& e) {
        spdlog::warn("kv {}: dropping malformed message from {}: {}", config_.self.id, from.id, e.what());
        return;
    }
    std::visit([&](const auto& v) { handle(from, v); }, m);
    notify_session_state();
}

// ---------------------------------------------------------------- elections

void Node::reset_election_deadline() {
    std::uniform_int_distribution<std::int64_t> d(config_.election_min.count(), config_.election_max.count());
    election_deadline_ = clock_.now() + rt::Duration(d(rng_));
}

bool Node::log_up_to_date(std::uint64_t last_index, std::uint64_t last_term) const {
    if (last_term != this->last_term()) return last_term > this->last_term();
    return last_index >= this->last_index();
}

void Node::start_pre_vote() {
    reset_election_deadline();
    if (config_.members.size() == 1) {
        start_election();
        return;
    }
    pre_voting_ = true;
    votes_ = {config_.self};
    for (auto peer : config_.members) {
        if (peer != config_.self) send(peer, proto::VoteRequest{term_ + 1, true, last_index(), last_term()});
    }
}

void Node::start_election() {
    pre_voting_ = false;
    role_ = Role::Candidate;
    ++term_;
    voted_for_ = config_.self;
    leader_.reset();
    votes_ = {config_.self};
    last_ack_.clear();
    reset_election_deadline();
    if (votes_.size() >= majority()) {
        become_leader();
        return;
    }
    for (auto peer : config_.members) {
        if (peer != config_.self) send(peer, proto::VoteRequest{term_, false, last_index(), last_term()});
    }
}

void Node::become_follower(std::uint64_t term) {
    if (term > term_) {
        term_ = term;
        voted_for_.reset();
        leader_.reset();
    }
    if (role_ == Role::Leader) leader_.reset();
    role_ = Role::Follower;
    pre_voting_ = false;
    votes_.clear();
    reset_election_deadline();
}

void Node::become_leader() {
    spdlog::debug("kv {}: leader for term {}", config_.self.id, term_);
    role_ = Role::Leader;
    leader_ = config_.self;
    pre_voting_ = false;
    const auto now = clock_.now();
    became_leader_ = now;
    for (auto peer : config_.members) {
        if (peer == config_.self) continue;
        next_[peer] = last_index() + 1;
        match_[peer] = 0;
    }
    session_deadline_.clear();
    expiring_.clear();
    propose(Command{config_.self.id, incarnation_, 0, Noop{}});
    leader_start_index_ = last_index();
    resend_pending(true);
}

void Node::handle(ServerId from, const proto::VoteRequest& m) {
    const auto now = clock_.now();
    if (m.pre) {
        const bool leader_recent = role_ == Role::Leader ||
                                   (heard_leader_ && leader_ && now - last_leader_contact_ < config_.election_min);
        const bool grant = voter_ && !leader_recent && m.term > term_ && log_up_to_date(m.last_index, m.last_term);
        send(from, proto::VoteReply{term_, true, grant});
        return;
    }
    if (m.term > term_) become_follower(m.term);
    const bool grant = m.term == term_ && voter_ && (!voted_for_ || *voted_for_ == from) &&
                       log_up_to_date(m.last_index, m.last_term);
    if (grant) {
        voted_for_ = from;
        reset_election_deadline();
    }
    send(from, proto::VoteReply{term_, false, grant});
}

void Node::handle(ServerId from, const proto::VoteReply& m) {
    if (m.term > term_) {
        become_follower(m.term);
        return;
    }
    if (!m.granted) return;
    if (m.pre) {
        if (!pre_voting_ || role_ == Role::Leader) return;
        votes_.insert(from);
        if (votes_.size() >= majority()) start_election();
        return;
    }
    if (role_ != Role::Candidate || m.term != term_) return;
    votes_.insert(from);
    last_ack_[from] = clock_.now();
    if (votes_.size() >= majority()) become_leader();
}

// ---------------------------------------------------------------- replication

void Node::propose(Command cmd) {
    log_.push_back({term_, std::move(cmd)});
    if (config_.members.size() == 1) {
        advance_commit();
        return;
    }
    broadcast_append();
}

void Node::broadcast_append() {
    for (auto peer : config_.members) {
        if (peer != config_.self) send_append(peer);
    }
    last_heartbeat_ = clock_.now();
}

void Node::send_append(ServerId to) {
    auto& next = next_[to];
    next = std::clamp<std::uint64_t>(next, 1, last_index() + 1);
    proto::AppendRequest req;
    req.term = term_;
    req.prev_index = next - 1;
    req.prev_term = log_[req.prev_index].term;
    req.commit = commit_;
    const auto end = std::min<std::uint64_t>(last_index(), next - 1 + kMaxEntriesPerAppend);
    for (auto i = next; i <= end; ++i) req.entries.push_back(log_[i]);
    next = end + 1;
    send(to, req);
}

void Node::handle(ServerId from, const proto::AppendRequest& m) {
    if (m.term < term_) {
        send(from, proto::AppendReply{term_, false, 0});
        return;
    }
    if (m.term > term_ || role_ != Role::Follower) become_follower(m.term);
    leader_ = from;
    heard_leader_ = true;
    last_leader_contact_ = clock_.now();
    reset_election_deadline();
    // A replica that follows this term's leader cannot vote for anyone else in it.
    if (!voted_for_) voted_for_ = from;

    if (m.prev_index > last_index() || log_[m.prev_index].term != m.prev_term) {
        const std::uint64_t hint = std::min<std::uint64_t>(m.prev_index == 0 ? 0 : m.prev_index - 1, last_index());
        send(from, proto::AppendReply{term_, false, hint});
        return;
    }
    auto idx = m.prev_index;
    for (const auto& e : m.entries) {
        ++idx;
        if (idx <= last_index()) {
            if (log_[idx].term == e.term) continue;
            if (idx <= commit_) spdlog::error("kv {}: truncating committed index {}", config_.self.id, idx);
            log_.resize(idx);
        }
        log_.push_back(e);
    }
    const auto match = m.prev_index + m.entries.size();
    commit_ = std::max(commit_, std::min(m.commit, match));
    apply_committed();
    if (!voter_ && match >= m.commit) {
        voter_ = true;
        spdlog::debug("kv {}: caught up at index {}", config_.self.id, match);
    }
    send(from, proto::AppendReply{term_, true, match});
}

void Node::handle(ServerId from, const proto::AppendReply& m) {
    if (m.term > term_) {
        become_follower(m.term);
        return;
    }
    if (role_ != Role::Leader || m.term != term_) return;
    last_ack_[from] = clock_.now();
    if (m.success) {
        match_[from] = std::max(match_[from], m.match_index);
        if (next_[from] < match_[from] + 1) next_[from] = match_[from] + 1;
        advance_commit();
        if (next_[from] <= last_index()) send_append(from);
    } else {
        next_[from] = m.match_index + 1;
        send_append(from);
    }
}

void Node::advance_commit() {
    for (auto n = last_index(); n > commit_; --n) {
        if (log_[n].term != term_) break;
        std::size_t count = 1;
        for (const auto& [peer, match] : match_) {
            if (match >= n) ++count;
        }
        if (count >= majority()) {
            commit_ = n;
            break;
        }
    }
    apply_committed();
}

void Node::apply_committed() {
    const auto now = clock_.now();
    while (applied_ < commit_) {
        const auto& cmd = log_[++applied_].cmd;
        auto out = sm_.apply(cmd);
        if (role_ == Role::Leader && !out.duplicate) {
            if (auto* open = std::get_if<OpenSession>(&cmd.op)) session_deadline_[open->session] = now + config_.session_timeout;
            if (auto* exp = std::get_if<ExpireSession>(&cmd.op)) {
                session_deadline_.erase(exp->session);
                expiring_.erase(exp->session);
            }
        }
        if (auto* exp = std::get_if<ExpireSession>(&cmd.op);
            exp && !out.duplicate && out.result.status == Status::Ok && session_ && exp->session == *session_) {
            session_lost();
        }
        if (cmd.origin == config_.self.id && cmd.incarnation == incarnation_ && cmd.req_id != 0) {
            if (auto it = pending_.find(cmd.req_id); it != pending_.end()) {
                auto cb = std::move(it->second.cb);
                pending_.erase(it);
                if (cb) defer([cb = std::move(cb), r = out.result] { cb(r); });
            }
        }
        for (const auto& ev : out.events) {
            auto [lo, hi] = watches_.equal_range(ev.key);
            std::vector<WatchFn> fire;
            for (auto it = lo; it != hi; ++it) fire.push_back(std::move(it->second.second));
            watches_.erase(lo, hi);
            for (auto& fn : fire) defer([fn = std::move(fn), ev] { fn(ev); });
        }
    }
}

void Node::handle(ServerId from, const proto::Forward& m) {
    if (role_ == Role::Leader) propose(m.cmd);
}

bool Node::quorum_recent() const {
    if (role_ != Role::Leader) return false;
    const auto now = clock_.now();
    std::size_t count = 1;
    for (const auto& [peer, t] : last_ack_) {
        if (now - t <= config_.election_max) ++count;
    }
    return count >= majority();
}

bool Node::local_write_available() const {
    if (role_ == Role::Leader) return quorum_recent();
    if (role_ != Role::Follower || !voter_ || !leader_ || !heard_leader_) return false;
    return clock_.now() - last_leader_contact_ <= config_.election_max;
}

// ---------------------------------------------------------------- sessions

void Node::open_new_session() {
    const SessionId s{config_.self.id, rng_()};
    session_ = s;
    session_open_ = false;
    session_open_submitted_ = clock_.now();
    submit(OpenSession{s}, [this, s](Result) {
        if (session_ != s) return;
        session_open_ = true;
        confirmed_until_ = session_open_submitted_ + lease();
        last_keepalive_ = clock_.now();
        notify_session_state();
    });
}

void Node::session_lost() {
    spdlog::debug("kv {}: session {:x} expired", config_.self.id, session_ ? session_->nonce : 0);
    keepalive_sent_.clear();
    open_new_session();
    notify_session_state();
}

SessionState Node::session_state() const {
    if (!session_) return SessionState::None;
    if (!session_open_) return SessionState::Opening;
    return clock_.now() < confirmed_until_ ? SessionState::Live : SessionState::Unconfirmed;
}

bool Node::owns(const std::string& key) const {
    if (session_state() != SessionState::Live || releasing_.count(key)) return false;
    auto e = sm_.get(key);
    return e && e->ephemeral_owner == session_;
}

void Node::notify_session_state() {
    auto s = session_state();
    if (s == notified_state_) return;
    notified_state_ = s;
    if (session_listener_) defer([this, s] {
            if (session_listener_) session_listener_(s);
        });
}

std::optional<bool> Node::keepalive_verdict(SessionId s) {
    if (role_ != Role::Leader || !quorum_recent() || commit_ < leader_start_index_) return std::nullopt;
    if (!sm_.session_live(s)) return false;
    if (expiring_.count(s)) return std::nullopt;
    session_deadline_[s] = clock_.now() + config_.session_timeout;
    return true;
}

void Node::send_keepalive() {
    const auto now = clock_.now();
    last_keepalive_ = now;
    const auto seq = ++keepalive_seq_;
    keepalive_sent_[seq] = now;
    while (now - keepalive_sent_.begin()->second > config_.session_timeout) keepalive_sent_.erase(keepalive_sent_.begin());
    if (role_ == Role::Leader) {
        if (auto v = keepalive_verdict(*session_)) on_keepalive_reply({*session_, seq, *v});
    } else if (leader_) {
        send(*leader_, proto::KeepAlive{*session_, seq});
    }
}

void Node::handle(ServerId from, const proto::KeepAlive& m) {
    if (auto v = keepalive_verdict(m.session)) send(from, proto::KeepAliveReply{m.session, m.seq, *v});
}

void Node::handle(ServerId, const proto::KeepAliveReply& m) { on_keepalive_reply(m); }

void Node::on_keepalive_reply(const proto::KeepAliveReply& m) {
    if (!session_ || m.session != *session_ || !session_open_) return;
    auto it = keepalive_sent_.find(m.seq);
    if (it == keepalive_sent_.end()) return;
    if (!m.live) {
        session_lost();
        return;
    }
    confirmed_until_ = std::max(confirmed_until_, it->second + lease());
    keepalive_sent_.erase(keepalive_sent_.begin(), std::next(it));
}

void Node::leader_session_checks() {
    if (commit_ < leader_start_index_) return;
    const auto now = clock_.now();
    for (const auto& s : sm_.sessions()) {
        auto [it, inserted] = session_deadline_.try_emplace(s, now + config_.session_timeout);
        if (now > it->second && !expiring_.count(s)) {
            spdlog::debug("kv {}: expiring session of server {}", config_.self.id, s.owner);
            expiring_.insert(s);
            propose(Command{config_.self.id, incarnation_, 0, ExpireSession{s}});
        }
    }
}

}  // namespace migrant::coordkv
