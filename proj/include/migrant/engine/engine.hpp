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

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "migrant/engine/topic_cache.hpp"
#include "migrant/runtime/executor.hpp"
#include "migrant/wire/codec.hpp"

namespace migrant::engine {

/// Connection handle. The IoShard and WorkerShard indices are encoded in the low
/// 16 bits so every layer can route without a shared table.
using ConnectionId = std::uint64_t;

constexpr std::uint32_t io_shard_of(ConnectionId c) noexcept { return static_cast<std::uint32_t>((c >> 8) & 0xff); }
constexpr std::uint32_t worker_shard_of(ConnectionId c) noexcept { return static_cast<std::uint32_t>(c & 0xff); }
constexpr ConnectionId make_connection_id(std::uint64_t serial, std::uint32_t io, std::uint32_t worker) noexcept {
    return (serial << 16) | (static_cast<std::uint64_t>(io & 0xff) << 8) | (worker & 0xff);
}

struct BatchPolicy {
    rt::Duration max_delay = rt::Duration::zero();  // zero disables batching
    std::size_t max_bytes = 64 * 1024;

    bool enabled() const noexcept { return max_delay > rt::Duration::zero(); }
};

/// Reduces the pending notifications of one topic to the single one that is sent.
using ConflationReducer = std::function<Message(std::span<const Message>)>;

/// Default reducer: the message with the greatest OrderKey.
Message keep_latest(std::span<const Message> pending);

struct ConflationPolicy {
    rt::Duration window = rt::Duration::zero();  // zero disables conflation
    ConflationReducer reducer = keep_latest;

    bool enabled() const noexcept { return window > rt::Duration::zero(); }
};

/// Aggregates `pending` (non-empty, one topic) with the policy's reducer.
Message conflate_flush(const ConflationPolicy& policy, std::span<const Message> pending);

struct EngineConfig {
    std::uint32_t server_id = 0;
    std::uint32_t io_threads = 1;
    std::uint32_t workers = 1;
    std::uint32_t num_groups = kDefaultNumGroups;
    std::size_t cache_depth = 1000;
    BatchPolicy batch;
    ConflationPolicy conflation;
    std::size_t max_outbound_bytes = 4u << 20;
    std::size_t max_connections = 1u << 20;
};

/// Byte sink for client connections. Called only on the connection's IoShard executor.
class ClientTransport {
public:
    virtual ~ClientTransport() = default;
    /// Writes `bytes` as one I/O operation; returns the number of bytes still queued
    /// for the connection after the call.
    virtual std::size_t write(ConnectionId conn, Bytes bytes) = 0;
    virtual void close(ConnectionId conn) = 0;
};

/// Receiver of client publications, invoked on the control executor in per-connection order.
class PublicationHandler {
public:
    virtual ~PublicationHandler() = default;
    virtual void on_client_publish(ConnectionId conn, wire::Publish publish) = 0;
};

class ConnectionLimitReached : public std::runtime_error {
public:
    ConnectionLimitReached() : std::runtime_error("connection limit reached") {}
};

struct EngineRuntime {
    rt::Clock* clock = nullptr;
    std::vector<rt::Executor*> io;       // one per IoShard
    std::vector<rt::Executor*> workers;  // one per WorkerShard
    rt::Executor* control = nullptr;     // the server's control loop
    ClientTransport* transport = nullptr;
};

struct EngineStats {
    std::atomic<std::uint64_t> writes{0};
    std::atomic<std::uint64_t> bytes_out{0};
    std::atomic<std::uint64_t> notifications{0};
    std::atomic<std::uint64_t> slow_consumer_disconnects{0};
    std::atomic<std::uint64_t> protocol_violations{0};
    std::atomic<std::uint64_t> assignment_violations{0};
    std::atomic<std::uint64_t> stale_appends{0};
};

class Engine;

/// I/O layer shard: per-connection decode buffers and outbound batching.
class IoShard {
public:
    IoShard(Engine& engine, std::uint32_t index) : engine_(engine), index_(index) {}

    void open(ConnectionId conn);
    void on_bytes(ConnectionId conn, std::span<const std::uint8_t> bytes);
    void on_disconnected(ConnectionId conn);
    void send(ConnectionId conn, std::shared_ptr<const Bytes> bytes);
    void close(ConnectionId conn, wire::CloseReason reason, std::string detail);
    void close_all(wire::CloseReason reason);

    std::size_t connection_count() const noexcept { return conns_.size(); }

private:
    struct Conn {
        wire::DecodeBuffer decoder;
        Bytes batch;
        std::uint64_t flush_generation = 0;
        bool flush_scheduled = false;
    };

    void write_now(ConnectionId conn, Bytes bytes);
    void flush(ConnectionId conn);
    void drop(ConnectionId conn);

    Engine& engine_;
    std::uint32_t index_;
    std::unordered_map<ConnectionId, Conn> conns_;
};

/// Logic layer shard: protocol state, subscription index, local fan-out and conflation.
class WorkerShard {
public:
    WorkerShard(Engine& engine, std::uint32_t index) : engine_(engine), index_(index) {}

    void open(ConnectionId conn);
    void on_frame(ConnectionId conn, wire::Frame frame);
    void on_closed(ConnectionId conn);
    void deliver(const std::shared_ptr<const Message>& m);

    std::size_t subscriber_count(const TopicName& topic) const;

private:
    struct Subscription {
        OrderKey last_sent;
        std::vector<Message> conflation_pending;
    };
    struct Conn {
        std::uint32_t assigned_worker = 0;
        bool connected = false;
        std::unordered_map<TopicName, Subscription> subs;
    };

    void handle_subscribe(ConnectionId conn, Conn& c, const wire::Subscribe& s);
    void violation(ConnectionId conn, const char* what);
    void flush_conflated(ConnectionId conn, const TopicName& topic);
    void send_frame(ConnectionId conn, const wire::Frame& f);

    Engine& engine_;
    std::uint32_t index_;
    std::unordered_map<ConnectionId, Conn> conns_;
    std::unordered_map<TopicName, std::unordered_set<ConnectionId>> index_by_topic_;
};

/// Single-node broker runtime: two layers of shards around a group-locked cache.
class Engine {
public:
    Engine(EngineConfig config, EngineRuntime runtime);
    ~Engine();

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    void set_publication_handler(PublicationHandler* h) { handler_ = h; }

    /// Assigns a new connection to IoShard client_shard(address, io_threads) and
    /// WorkerShard client_shard(address, workers). Thread-safe.
    ConnectionId accept(std::string_view address);

    /// Transport callbacks; must run on the connection's IoShard executor.
    void on_bytes(ConnectionId conn, std::span<const std::uint8_t> bytes);
    void on_disconnected(ConnectionId conn);

    /// Appends to the cache and, when appended, fans out to local subscribers.
    /// Returns false for a stale message (already cached or older).
    bool append_and_deliver(const Message& m);

    /// Sends one frame to a client connection (any thread).
    void send(ConnectionId conn, const wire::Frame& f);
    void send_bytes(ConnectionId conn, std::shared_ptr<const Bytes> bytes);
    void close(ConnectionId conn, wire::CloseReason reason, std::string detail = {});
    void close_all_clients(wire::CloseReason reason);

    /// While false, CONNECT is answered with a refusal.
    void set_accepting(bool accepting) { accepting_.store(accepting); }
    bool accepting() const { return accepting_.load(); }

    TopicCache& cache() { return cache_; }
    const TopicCache& cache() const { return cache_; }
    const EngineConfig& config() const { return config_; }
    const EngineRuntime& runtime() const { return rt_; }
    EngineStats& stats() { return stats_; }
    std::size_t connection_count() const { return live_connections_.load(); }

    IoShard& io_shard(std::uint32_t i) { return *io_[i]; }
    WorkerShard& worker_shard(std::uint32_t i) { return *workers_[i]; }

private:
    friend class IoShard;
    friend class WorkerShard;

    rt::Executor& io_exec(ConnectionId c) { return *rt_.io[io_shard_of(c)]; }
    rt::Executor& worker_exec(ConnectionId c) { return *rt_.workers[worker_shard_of(c)]; }
    void connection_gone() { live_connections_.fetch_sub(1); }

    EngineConfig config_;
    EngineRuntime rt_;
    TopicCache cache_;
    std::vector<std::unique_ptr<IoShard>> io_;
    std::vector<std::unique_ptr<WorkerShard>> workers_;
    PublicationHandler* handler_ = nullptr;
    std::atomic<std::uint64_t> next_serial_{1};
    std::atomic<std::size_t> live_connections_{0};
    std::atomic<bool> accepting_{true};
    EngineStats stats_;
};

}  // namespace migrant::engine
