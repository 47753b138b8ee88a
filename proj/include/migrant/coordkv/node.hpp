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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "migrant/coordkv/protocol.hpp"
#include "migrant/coordkv/state_machine.hpp"
#include "migrant/runtime/executor.hpp"

namespace migrant::coordkv {

using namespace std::chrono_literals;

struct NodeConfig {
    ServerId self;
    std::vector<ServerId> members;  // all replicas, self included
    rt::Duration tick = 50ms;
    rt::Duration heartbeat = 100ms;
    rt::Duration election_min = 500ms;
    rt::Duration election_max = 1000ms;
    rt::Duration session_timeout = 5s;
    rt::Duration keepalive_interval = 1s;
    rt::Duration retry_interval = 300ms;
    /// The owner stops trusting its session this long after the last acknowledged keepalive.
    double owner_lease_fraction = 0.6;
    /// Set after a restart: the replica lost its state and must not vote until a
    /// leader has brought it up to date.
    bool rejoining = false;
    std::uint64_t seed = 1;
};

enum class Role { Follower, Candidate, Leader };

enum class SessionState { None, Opening, Live, Unconfirmed };

/// One replica of the coordination KV. Single-threaded: every method, callback and
/// watch runs on the executor passed at construction.
class Node {
public:
    using SendFn = std::function<void(ServerId to, Bytes bytes)>;
    using Callback = std::function<void(Result)>;
    using WatchFn = std::function<void(const WatchEvent&)>;
    using WatchId = std::uint64_t;

    Node(NodeConfig config, rt::Executor& exec, rt::Clock& clock, SendFn send);
    ~Node();

    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    /// Starts timers and opens this server's session.
    void start();

    void on_message(ServerId from, std::span<const std::uint8_t> bytes);

    void create_ephemeral(const std::string& key, const std::string& value, Callback cb);
    void create_ephemeral(const std::string& key, const std::string& value, SessionId session, Callback cb);
    void delete_ephemeral(const std::string& key, Callback cb);
    /// Requires desired > expected. An absent key reads as 0.
    void cas_counter(const std::string& key, std::uint64_t expected, std::uint64_t desired, Callback cb);
    void expire_session(SessionId session, Callback cb);

    /// Local read; never older than anything previously returned by this replica.
    std::optional<Entry> get(const std::string& key) const { return sm_.get(key); }

    /// One-shot watch, fired on the next create, change or delete of `key` applied here.
    WatchId watch(const std::string& key, WatchFn fn);
    void unwatch(WatchId id);

    bool local_write_available() const;

    std::optional<SessionId> session() const { return session_; }
    SessionState session_state() const;
    /// True when `key` is an ephemeral entry of this server's session and the session
    /// lease is confirmed.
    bool owns(const std::string& key) const;
    void set_session_listener(std::function<void(SessionState)> fn) { session_listener_ = std::move(fn); }

    Role role() const { return role_; }
    bool is_leader() const { return role_ == Role::Leader; }
    std::optional<ServerId> leader() const { return leader_; }
    std::uint64_t term() const { return term_; }
    std::uint64_t commit_index() const { return commit_; }
    std::uint64_t last_index() const { return log_.size() - 1; }
    bool voter() const { return voter_; }
    const StateMachine& state() const { return sm_; }
    std::size_t pending_requests() const { return pending_.size(); }

private:
    struct Pending {
        Command cmd;
        Callback cb;
        rt::TimePoint last_sent{};
        bool sent = false;
    };

    void schedule_tick();
    void tick();
    void submit(Op op, Callback cb);
    void send_pending(Pending& p);
    void resend_pending(bool all);
    void propose(Command cmd);

    void start_pre_vote();
    void start_election();
    void become_follower(std::uint64_t term);
    void become_leader();
    void reset_election_deadline();
    bool log_up_to_date(std::uint64_t last_index, std::uint64_t last_term) const;
    std::uint64_t last_term() const { return log_.back().term; }

    void send(ServerId to, const proto::Message& m);
    void send_append(ServerId to);
    void broadcast_append();
    void advance_commit();
    void apply_committed();
    bool quorum_recent() const;
    std::size_t majority() const { return config_.members.size() / 2 + 1; }

    void handle(ServerId from, const proto::VoteRequest& m);
    void handle(ServerId from, const proto::VoteReply& m);
    void handle(ServerId from, const proto::AppendRequest& m);
    void handle(ServerId from, const proto::AppendReply& m);
    void handle(ServerId from, const proto::Forward& m);
    void handle(ServerId from, const proto::KeepAlive& m);
    void handle(ServerId from, const proto::KeepAliveReply& m);

    std::optional<bool> keepalive_verdict(SessionId s);
    void send_keepalive();
    void on_keepalive_reply(const proto::KeepAliveReply& m);
    void open_new_session();
    void session_lost();
    void leader_session_checks();
    void notify_session_state();
    rt::Duration lease() const;

    void defer(std::function<void()> fn);
    void post_guarded(rt::Duration d, std::function<void()> fn);

    NodeConfig config_;
    rt::Executor& exec_;
    rt::Clock& clock_;
    SendFn send_fn_;
    std::shared_ptr<int> alive_ = std::make_shared<int>(0);
    std::mt19937_64 rng_;
    std::uint64_t incarnation_;

    // Raft
    Role role_ = Role::Follower;
    std::uint64_t term_ = 0;
    std::optional<ServerId> voted_for_;
    std::optional<ServerId> leader_;
    std::vector<proto::LogEntry> log_;  // index 0 is a sentinel
    std::uint64_t commit_ = 0;
    std::uint64_t applied_ = 0;
    bool voter_ = true;
    rt::TimePoint election_deadline_{};
    rt::TimePoint last_leader_contact_{};
    bool heard_leader_ = false;
    std::set<ServerId> votes_;
    bool pre_voting_ = false;
    std::uint64_t leader_start_index_ = 0;
    rt::TimePoint became_leader_{};
    rt::TimePoint last_heartbeat_{};
    std::map<ServerId, std::uint64_t> next_;
    std::map<ServerId, std::uint64_t> match_;
    std::map<ServerId, rt::TimePoint> last_ack_;

    // Requests originating here
    std::uint64_t next_req_ = 1;
    std::map<std::uint64_t, Pending> pending_;

    // Sessions
    std::optional<SessionId> session_;
    bool session_open_ = false;
    rt::TimePoint session_open_submitted_{};
    rt::TimePoint confirmed_until_{};
    std::uint64_t keepalive_seq_ = 0;
    std::map<std::uint64_t, rt::TimePoint> keepalive_sent_;
    rt::TimePoint last_keepalive_{};
    std::function<void(SessionState)> session_listener_;
    SessionState notified_state_ = SessionState::None;
    // leader-side deadlines, rebuilt on every election
    std::map<SessionId, rt::TimePoint> session_deadline_;
    std::set<SessionId> expiring_;
    std::map<std::string, int> releasing_;

    // Watches
    WatchId next_watch_ = 1;
    std::multimap<std::string, std::pair<WatchId, WatchFn>> watches_;

    StateMachine sm_;
};

}  // namespace migrant::coordkv
