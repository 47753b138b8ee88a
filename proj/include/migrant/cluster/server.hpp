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

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <unordered_map>
#include <vector>

#include "migrant/coordkv/node.hpp"
#include "migrant/engine/engine.hpp"

namespace migrant::cluster {

using namespace std::chrono_literals;

struct ServerConfig {
    ServerId self;
    /// Every member, including self. One member disables replication.
    std::vector<ServerId> servers;
    rt::Duration t_pub = 2s;
    /// A peer not heard from for this long is declared failed.
    rt::Duration t_timeout = 2s;
    rt::Duration ping_interval = 500ms;
    rt::Duration replicate_retry = 250ms;
    rt::Duration tick = 50ms;
    rt::Duration takeover_jitter = 200ms;
    std::size_t reconcile_chunk_bytes = 256 * 1024;
    /// self, members and rejoining are filled in by the server.
    coordkv::NodeConfig kv;
    /// Set when the process comes back after a crash; the cache is rebuilt before accepting clients.
    bool restarted = false;
    std::uint64_t seed = 1;
};

enum class ReconcileReason { Gap, LinkUp, Takeover, Restart, Unfence };

const char* reason_name(ReconcileReason r) noexcept;

/// Protocol events, for tests and the simulation trace. Called on the control executor.
class ClusterObserver {
public:
    virtual ~ClusterObserver() = default;
    virtual void on_won(ServerId, GroupId, std::uint64_t /*epoch*/) {}
    virtual void on_lost(ServerId, GroupId) {}
    virtual void on_assign(ServerId, GroupId, const Message&) {}
    virtual void on_append(ServerId, const Message&) {}
    /// Immediately before a PUBACK frame is handed to the engine.
    virtual void on_puback(ServerId, const Message&) {}
    virtual void on_pubnack(ServerId, MsgId, wire::NackReason) {}
    virtual void on_gap(ServerId, ServerId /*from*/, const Message&) {}
    virtual void on_reconcile(ServerId, ServerId /*peer*/, std::uint32_t /*group*/, ReconcileReason) {}
    virtual void on_fence(ServerId) {}
    virtual void on_ready(ServerId) {}
    virtual void on_peer_state(ServerId, ServerId /*peer*/, bool /*up*/) {}
};

using PeerSend = std::function<void(ServerId to, const wire::Frame& frame)>;

struct ServerStats {
    std::uint64_t assigned = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t pubacks = 0;
    std::uint64_t pubnacks = 0;
    std::uint64_t retransmits = 0;
    std::uint64_t gaps = 0;
    std::uint64_t reconcile_requests = 0;
    std::uint64_t elections_won = 0;
    std::uint64_t fences = 0;
};

/// Replication layer of one server: coordinator election per topic group, sequencing,
/// broadcast with two-copy acknowledgment, cache reconciliation and self-fencing.
/// Every method runs on the engine's control executor.
class Server final : public engine::PublicationHandler {
public:
    Server(ServerConfig config, engine::Engine& engine, PeerSend send, ClusterObserver* observer = nullptr);
    ~Server() override;

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void start();

    void on_client_publish(engine::ConnectionId conn, wire::Publish publish) override;
    void on_peer_frame(ServerId from, wire::Frame frame);

    bool replicated() const { return config_.servers.size() > 1; }
    bool fenced() const { return fenced_; }
    /// False while rebuilding after a restart or recovering from a fence.
    bool serving() const { return !fenced_ && !rebuilding_; }
    bool coordinates(GroupId g) const;
    std::optional<std::uint64_t> epoch_of(GroupId g) const;
    std::optional<ServerId> gossip(GroupId g) const;
    bool peer_up(ServerId peer) const;
    coordkv::Node* kv() { return kv_.get(); }
    const ServerStats& stats() const { return stats_; }
    const ServerConfig& config() const { return config_; }
    std::size_t inflight() const { return inflight_.size(); }

private:
    struct Origin {
        std::optional<engine::ConnectionId> conn;  // local publisher awaiting an answer
        std::optional<ServerId> peer;              // contact server that forwarded it
    };
    struct Queued {
        Origin origin;
        wire::Publish publish;
    };
    struct Owned {
        std::uint64_t epoch = 0;
        bool ready = false;
        std::unordered_map<TopicName, std::uint64_t> seq;
    };
    struct Election {
        rt::TimePoint deadline;
        std::uint64_t attempt = 0;
    };
    struct Inflight {
        Message message;
        std::optional<engine::ConnectionId> conn;
        bool acked = false;
        std::set<ServerId> unacked;
        rt::TimePoint next_retry;
    };
    struct Contact {
        engine::ConnectionId conn;
        ServerId target;
        GroupId group;
        rt::TimePoint deadline;
    };
    struct Peer {
        bool up = false;
        bool ever_heard = false;
        rt::TimePoint last_heard{};
        rt::TimePoint last_ping{};
    };
    struct GossipEntry {
        ServerId server;
        std::uint64_t epoch = 0;
    };
    struct Job {
        ReconcileReason reason = ReconcileReason::LinkUp;
        std::uint32_t group = wire::kAllGroups;
        std::set<ServerId> waiting;
        std::set<ServerId> answered;
        std::vector<Message> messages;
        // topic -> per-responder truncation point; none when that responder holds full history
        std::map<TopicName, std::vector<OrderKey>> horizons;
        std::map<ServerId, std::map<TopicName, OrderKey>> heads;
        std::function<void(Job&)> done;
    };
    struct Request {
        std::uint64_t job = 0;
        ServerId peer;
        std::map<TopicName, OrderKey> known;
        rt::TimePoint sent_at;
        std::vector<Message> messages;
    };

    using InflightKey = std::pair<TopicName, OrderKey>;

    void post_after(rt::Duration d, std::function<void()> fn);
    void tick();
    void send(ServerId to, const wire::Frame& f);
    std::vector<ServerId> peers() const;
    std::vector<ServerId> up_peers() const;
    GroupId group_of(const TopicName& t) const { return engine_.cache().group_of(t); }
    OrderKey local_last(const TopicName& t) const;

    // publication path
    void publish_single(engine::ConnectionId conn, const wire::Publish& p);
    void route(Queued q);
    void assign(GroupId g, Queued q);
    void answer_nack(const Origin& o, const MsgId& id, bool ack_requested, wire::NackReason reason,
                     ServerId hint = ServerId{ServerId::kNone});
    void send_puback(engine::ConnectionId conn, const Message& m);
    void on_forwarded(ServerId from, wire::Publish p);
    void on_pubnack(ServerId from, const wire::PubNack& n);
    void on_repl_ack(ServerId from, const wire::ReplAck& a);
    void on_replicate(ServerId from, Message m);
    void apply(const Message& m);
    void ack_if_cached(ServerId to, const Message& m);
    void retransmit(rt::TimePoint now);
    void expire_contacts(rt::TimePoint now);

    // coordination
    std::optional<ServerId> kv_owner(GroupId g) const;
    void watch_coord(GroupId g);
    void on_coord_event(GroupId g, const coordkv::WatchEvent& ev);
    void run_for_coordinator(GroupId g);
    void claim_epoch(GroupId g, std::uint64_t attempt, std::uint64_t expected);
    void won(GroupId g, std::uint64_t epoch);
    void lost(GroupId g, std::optional<ServerId> owner, wire::NackReason reason);
    void abandon(GroupId g);
    void drain(GroupId g);
    void check_ownership();
    void check_elections(rt::TimePoint now);

    // reconciliation
    std::uint64_t start_job(ReconcileReason reason, std::uint32_t group, const std::vector<ServerId>& peers,
                            std::function<void(Job&)> done);
    void send_request(std::uint64_t job_id, ServerId peer);
    void on_reconcile_req(ServerId from, const wire::ReconcileReq& req);
    void on_reconcile_rsp(ServerId from, wire::ReconcileRsp rsp);
    void finish_response(std::uint64_t job_id, ServerId peer);
    void peer_failed_for_jobs(ServerId peer);
    void complete_job(std::uint64_t job_id);
    void merge(Job& job);
    void start_gap(GroupId g, ServerId from);
    void release_held(GroupId g);
    void rebroadcast_tail(GroupId g, const Job& job);
    void retry_requests(rt::TimePoint now);

    // liveness and fencing
    void update_peers(rt::TimePoint now);
    void peer_up_changed(ServerId peer, bool up);
    void check_fence(rt::TimePoint now);
    void fence();
    void drop_jobs();
    void unfence();
    void maybe_rebuild(rt::TimePoint now);

    ServerConfig config_;
    engine::Engine& engine_;
    rt::Executor& exec_;
    rt::Clock& clock_;
    PeerSend send_;
    ClusterObserver* observer_;
    std::unique_ptr<coordkv::Node> kv_;
    std::shared_ptr<int> alive_ = std::make_shared<int>(0);
    std::mt19937_64 rng_;
    ServerStats stats_;
    rt::TimePoint started_{};

    std::map<ServerId, Peer> peers_;
    std::map<GroupId, Owned> owned_;
    std::map<GroupId, Election> elections_;
    std::map<GroupId, std::vector<Queued>> waiting_;
    std::map<GroupId, GossipEntry> gossip_;
    std::map<InflightKey, Inflight> inflight_;
    std::unordered_map<MsgId, Contact> contacts_;
    std::unordered_map<TopicName, std::uint64_t> single_seq_;

    std::map<std::uint64_t, Job> jobs_;
    std::map<std::uint64_t, Request> requests_;
    std::uint64_t next_job_ = 1;
    std::uint64_t next_request_ = 1;
    std::set<GroupId> gap_jobs_;
    std::uint64_t election_attempts_ = 0;
    std::map<GroupId, std::vector<std::pair<ServerId, Message>>> held_;

    bool fenced_ = false;
    bool unfencing_ = false;
    bool rebuilding_ = false;
    bool rebuild_started_ = false;
};

}  // namespace migrant::cluster
