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
#include <string>
#include <unordered_map>

#include "migrant/client/dedupe.hpp"
#include "migrant/client/link.hpp"
#include "migrant/client/reconnect.hpp"
#include "migrant/client/server_list.hpp"
#include "migrant/wire/codec.hpp"

namespace migrant::client {

struct ClientConfig {
    ServerList servers{{{"localhost:7400", 1.0}}};
    ReconnectPolicy reconnect;
    rt::Duration blacklist_time = 30s;
    rt::Duration ping_interval = 5s;
    std::uint32_t missed_pongs = 2;
    /// Wait for PUBACK before republishing.
    rt::Duration ack_timeout = 3s;
    /// Delay before republishing after a PUBNACK, doubled per attempt up to 1.6 s.
    rt::Duration nack_retry = 100ms;
    /// Total time a publication may spend retrying before it fails.
    rt::Duration retry_budget = 30s;
    std::size_t dedupe_capacity = 1024;
    std::string name = "client";
    std::uint64_t seed = 1;
};

enum class PublishResult { Acked, Failed };
enum class ClientStatus { Connecting, Connected, Disconnected };

struct ClientDiagnostics {
    std::uint64_t delivered = 0;
    std::uint64_t duplicates = 0;    // suppressed by msg id
    std::uint64_t out_of_order = 0;  // suppressed because key <= last
    std::uint64_t truncated = 0;
    std::uint64_t connects = 0;
    std::uint64_t disconnects = 0;
    std::uint64_t publish_attempts = 0;
    std::uint64_t nacks = 0;
};

/// Publisher and subscriber SDK. Single-threaded: every method and callback runs on `exec`.
class Client {
public:
    using MessageFn = std::function<void(const Message&, bool recovered)>;
    using StatusFn = std::function<void(ClientStatus, const std::string& address)>;
    using TruncatedFn = std::function<void(const TopicName&)>;
    using SubscribedFn = std::function<void(const TopicName&, OrderKey head)>;
    using PublishFn = std::function<void(PublishResult, std::uint32_t attempts)>;

    Client(ClientConfig config, rt::Executor& exec, rt::Clock& clock, Connector& connector);
    ~Client();

    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void start();
    /// Closes the connection and stops reconnecting. Pending publications fail.
    void stop();

    void on_message(MessageFn fn) { on_message_ = std::move(fn); }
    void on_status(StatusFn fn) { on_status_ = std::move(fn); }
    void on_truncated(TruncatedFn fn) { on_truncated_ = std::move(fn); }
    /// Called on every SUBACK.
    void on_subscribed(SubscribedFn fn) { on_subscribed_ = std::move(fn); }

    void subscribe(const TopicName& topic);
    /// With `require_ack` the publication is retried under the same id until acknowledged
    /// or the retry budget runs out; without it, it is sent at most once.
    MsgId publish(const TopicName& topic, std::string payload, bool require_ack, PublishFn done = {});

    bool running() const { return running_; }
    ClientStatus status() const { return status_; }
    const std::string& address() const { return address_; }
    std::optional<OrderKey> resume_key(const TopicName& topic) const;
    const ClientDiagnostics& diagnostics() const { return diag_; }
    const Blacklist& blacklist() const { return blacklist_; }
    std::size_t pending_publications() const { return pending_.size(); }

private:
    class Handler;
    struct Pending {
        TopicName topic;
        std::string payload;
        PublishFn done;
        std::uint32_t attempts = 0;
        rt::TimePoint first_sent;
        rt::TimePoint deadline;  // ack wait
        std::uint64_t timer = 0;
    };
    struct Subscription {
        std::optional<OrderKey> resume;
        OrderKey last_delivered;
    };

    void post_after(rt::Duration d, std::function<void()> fn);
    void connect();
    void schedule_reconnect();
    void drop_connection(bool blacklist);
    void link_open(std::uint64_t gen);
    void link_bytes(std::uint64_t gen, std::span<const std::uint8_t> bytes);
    void link_closed(std::uint64_t gen);
    void on_frame(wire::Frame frame);
    void on_connected();
    void send(const wire::Frame& f);
    void send_subscribe(const TopicName& topic, const Subscription& s);
    void deliver(const Message& m, bool recovered);
    void transmit(const MsgId& id);
    void arm_ack_timer(const MsgId& id);
    void retry_later(const MsgId& id, rt::Duration delay);
    void finish(const MsgId& id, PublishResult r);
    void ping_tick(std::uint64_t gen);
    void set_status(ClientStatus s);

    ClientConfig config_;
    rt::Executor& exec_;
    rt::Clock& clock_;
    Connector& connector_;
    std::mt19937_64 rng_;
    std::shared_ptr<int> alive_ = std::make_shared<int>(0);

    std::unique_ptr<Handler> handler_;
    std::unique_ptr<Link> link_;
    wire::DecodeBuffer decoder_;
    std::uint64_t gen_ = 0;
    bool running_ = false;
    bool connected_ = false;  // CONNACK accepted
    std::string address_;
    std::uint32_t attempt_ = 0;
    std::uint32_t outstanding_pings_ = 0;
    ClientStatus status_ = ClientStatus::Disconnected;
    Blacklist blacklist_;

    std::map<TopicName, Subscription> subs_;
    DedupeBuffer dedupe_;
    std::unordered_map<MsgId, Pending> pending_;
    std::uint64_t next_timer_ = 1;
    ClientDiagnostics diag_;

    MessageFn on_message_;
    StatusFn on_status_;
    TruncatedFn on_truncated_;
    SubscribedFn on_subscribed_;
};

}  // namespace migrant::client
