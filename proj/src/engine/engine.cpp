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

#include "migrant/engine/engine.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace migrant::engine {

Message keep_latest(std::span<const Message> pending) {
    return *std::max_element(pending.begin(), pending.end(),
                             [](const Message& a, const Message& b) { return a.key < b.key; });
}

Message conflate_flush(const ConflationPolicy& policy, std::span<const Message> pending) {
    if (pending.empty()) throw InvalidArgument("conflate_flush needs at least one message");
    auto newest = std::max_element(pending.begin(), pending.end(),
                                   [](const Message& a, const Message& b) { return a.key < b.key; })->key;
    Message out = policy.reducer ? policy.reducer(pending) : keep_latest(pending);
    // The aggregate stands in for the newest pending message in the topic's order.
    out.key = newest;
    return out;
}

// ---------------------------------------------------------------- IoShard

void IoShard::open(ConnectionId conn) {
    if (io_shard_of(conn) != index_) engine_.stats_.assignment_violations.fetch_add(1);
    conns_.try_emplace(conn);
}

void IoShard::on_bytes(ConnectionId conn, std::span<const std::uint8_t> bytes) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    if (io_shard_of(conn) != index_) engine_.stats_.assignment_violations.fetch_add(1);
    std::vector<wire::Frame> frames;
    try {
        frames = it->second.decoder.decode_frames(bytes);
    } catch (const wire::MalformedFrame& e) {
        close(conn, wire::CloseReason::Malformed, e.what());
        return;
    }
    auto* worker = engine_.workers_[worker_shard_of(conn)].get();
    auto& exec = engine_.worker_exec(conn);
    for (auto& f : frames) {
        exec.post([worker, conn, f = std::move(f)]() mutable { worker->on_frame(conn, std::move(f)); });
    }
}

void IoShard::on_disconnected(ConnectionId conn) {
    if (conns_.count(conn)) drop(conn);
}

void IoShard::send(ConnectionId conn, std::shared_ptr<const Bytes> bytes) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    const auto& policy = engine_.config_.batch;
    if (!policy.enabled()) {
        write_now(conn, *bytes);
        return;
    }
    auto& c = it->second;
    c.batch.insert(c.batch.end(), bytes->begin(), bytes->end());
    if (c.batch.size() >= policy.max_bytes) {
        flush(conn);
        return;
    }
    if (!c.flush_scheduled) {
        c.flush_scheduled = true;
        auto gen = c.flush_generation;
        engine_.io_exec(conn).post_after(policy.max_delay, [this, conn, gen] {
            auto it = conns_.find(conn);
            if (it != conns_.end() && it->second.flush_generation == gen) flush(conn);
        });
    }
}

void IoShard::flush(ConnectionId conn) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    auto& c = it->second;
    ++c.flush_generation;
    c.flush_scheduled = false;
    if (c.batch.empty()) return;
    Bytes out;
    out.swap(c.batch);
    write_now(conn, std::move(out));
}

void IoShard::write_now(ConnectionId conn, Bytes bytes) {
    auto& stats = engine_.stats_;
    stats.writes.fetch_add(1, std::memory_order_relaxed);
    stats.bytes_out.fetch_add(bytes.size(), std::memory_order_relaxed);
    auto backlog = engine_.rt_.transport->write(conn, std::move(bytes));
    if (backlog > engine_.config_.max_outbound_bytes) {
        stats.slow_consumer_disconnects.fetch_add(1);
        spdlog::info("disconnecting slow consumer {:#x} with {} queued bytes", conn, backlog);
        engine_.rt_.transport->close(conn);
        drop(conn);
    }
}

void IoShard::close(ConnectionId conn, wire::CloseReason reason, std::string detail) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    flush(conn);
    if (!conns_.count(conn)) return;  // flush may have dropped a slow consumer
    engine_.rt_.transport->write(conn, wire::encode_frame(wire::Close{reason, std::move(detail)}));
    engine_.rt_.transport->close(conn);
    drop(conn);
}

void IoShard::close_all(wire::CloseReason reason) {
    std::vector<ConnectionId> ids;
    ids.reserve(conns_.size());
    for (const auto& [id, _] : conns_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (auto id : ids) close(id, reason, {});
}

void IoShard::drop(ConnectionId conn) {
    conns_.erase(conn);
    auto* worker = engine_.workers_[worker_shard_of(conn)].get();
    engine_.worker_exec(conn).post([worker, conn] { worker->on_closed(conn); });
    engine_.connection_gone();
}

// ---------------------------------------------------------------- WorkerShard

void WorkerShard::open(ConnectionId conn) {
    auto& c = conns_[conn];
    c.assigned_worker = worker_shard_of(conn);
    if (c.assigned_worker != index_) engine_.stats_.assignment_violations.fetch_add(1);
}

void WorkerShard::send_frame(ConnectionId conn, const wire::Frame& f) { engine_.send(conn, f); }

void WorkerShard::violation(ConnectionId conn, const char* what) {
    engine_.stats_.protocol_violations.fetch_add(1);
    spdlog::debug("protocol violation on {:#x}: {}", conn, what);
    engine_.close(conn, wire::CloseReason::ProtocolViolation, what);
    on_closed(conn);
}

void WorkerShard::on_frame(ConnectionId conn, wire::Frame frame) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    auto& c = it->second;
    if (c.assigned_worker != index_) engine_.stats_.assignment_violations.fetch_add(1);

    if (auto* connect = std::get_if<wire::Connect>(&frame)) {
        if (c.connected || connect->role != wire::Role::Client) return violation(conn, "unexpected CONNECT");
        if (!engine_.accepting()) {
            send_frame(conn, wire::ConnAck{ServerId{engine_.config_.server_id}, wire::ConnStatus::Refused});
            engine_.close(conn, wire::CloseReason::Refused);
            on_closed(conn);
            return;
        }
        c.connected = true;
        send_frame(conn, wire::ConnAck{ServerId{engine_.config_.server_id}, wire::ConnStatus::Accepted});
        return;
    }
    if (std::holds_alternative<wire::Ping>(frame)) {
        send_frame(conn, wire::Pong{});
        return;
    }
    if (std::holds_alternative<wire::Close>(frame)) {
        engine_.close(conn, wire::CloseReason::Normal);
        on_closed(conn);
        return;
    }
    if (!c.connected) return violation(conn, "frame before CONNECT");
    if (auto* sub = std::get_if<wire::Subscribe>(&frame)) {
        handle_subscribe(conn, c, *sub);
        return;
    }
    if (auto* pub = std::get_if<wire::Publish>(&frame)) {
        if (auto* handler = engine_.handler_) {
            engine_.rt_.control->post([handler, conn, p = std::move(*pub)]() mutable {
                handler->on_client_publish(conn, std::move(p));
            });
        }
        return;
    }
    violation(conn, "frame kind not accepted from clients");
}

void WorkerShard::handle_subscribe(ConnectionId conn, Conn& c, const wire::Subscribe& s) {
    // The read and the registration happen in this task, so any message appended after
    // the read is delivered by a later deliver() task and none is skipped.
    constexpr OrderKey kNoReplay{UINT64_MAX, UINT64_MAX};
    auto rr = engine_.cache_.read_after(s.topic, s.recover ? s.resume : kNoReplay);
    send_frame(conn, wire::SubAck{s.topic, rr.head});
    auto& sub = c.subs[s.topic];
    sub.conflation_pending.clear();
    if (s.recover) {
        if (rr.truncated) send_frame(conn, wire::RecoverEnd{s.topic, true});
        for (auto& m : rr.messages) send_frame(conn, wire::Recover{std::move(m)});
        sub.last_sent = std::max(s.resume, rr.head);
    } else {
        sub.last_sent = rr.head;
    }
    index_by_topic_[s.topic].insert(conn);
}

void WorkerShard::on_closed(ConnectionId conn) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    for (const auto& [topic, _] : it->second.subs) {
        auto ix = index_by_topic_.find(topic);
        if (ix == index_by_topic_.end()) continue;
        ix->second.erase(conn);
        if (ix->second.empty()) index_by_topic_.erase(ix);
    }
    conns_.erase(it);
}

void WorkerShard::deliver(const std::shared_ptr<const Message>& m) {
    auto ix = index_by_topic_.find(m->topic);
    if (ix == index_by_topic_.end()) return;
    const auto& conflation = engine_.config_.conflation;
    std::shared_ptr<const Bytes> encoded;
    // Iterate in id order so fan-out order does not depend on hash-set layout.
    std::vector<ConnectionId> targets(ix->second.begin(), ix->second.end());
    std::sort(targets.begin(), targets.end());
    for (auto conn : targets) {
        auto& c = conns_[conn];
        auto& sub = c.subs[m->topic];
        if (m->key <= sub.last_sent) continue;
        sub.last_sent = m->key;
        if (conflation.enabled()) {
            sub.conflation_pending.push_back(*m);
            if (sub.conflation_pending.size() == 1) {
                auto topic = m->topic;
                engine_.worker_exec(conn).post_after(conflation.window,
                                                     [this, conn, topic] { flush_conflated(conn, topic); });
            }
            continue;
        }
        if (!encoded) encoded = std::make_shared<const Bytes>(wire::encode_frame(wire::Notify{*m}));
        engine_.stats_.notifications.fetch_add(1, std::memory_order_relaxed);
        engine_.send_bytes(conn, encoded);
    }
}

void WorkerShard::flush_conflated(ConnectionId conn, const TopicName& topic) {
    auto it = conns_.find(conn);
    if (it == conns_.end()) return;
    auto sit = it->second.subs.find(topic);
    if (sit == it->second.subs.end() || sit->second.conflation_pending.empty()) return;
    auto m = conflate_flush(engine_.config_.conflation, sit->second.conflation_pending);
    sit->second.conflation_pending.clear();
    engine_.stats_.notifications.fetch_add(1, std::memory_order_relaxed);
    send_frame(conn, wire::Notify{std::move(m)});
}

std::size_t WorkerShard::subscriber_count(const TopicName& topic) const {
    auto ix = index_by_topic_.find(topic);
    return ix == index_by_topic_.end() ? 0 : ix->second.size();
}

// ---------------------------------------------------------------- Engine

Engine::Engine(EngineConfig config, EngineRuntime runtime)
    : config_(std::move(config)), rt_(std::move(runtime)), cache_(config_.num_groups, config_.cache_depth) {
    if (config_.io_threads == 0 || config_.io_threads > 256) throw InvalidArgument("io_threads must be in [1, 256]");
    if (config_.workers == 0 || config_.workers > 256) throw InvalidArgument("workers must be in [1, 256]");
    if (rt_.io.size() != config_.io_threads || rt_.workers.size() != config_.workers || !rt_.control ||
        !rt_.transport || !rt_.clock) {
        throw InvalidArgument("engine runtime does not match configuration");
    }
    for (std::uint32_t i = 0; i < config_.io_threads; ++i) io_.push_back(std::make_unique<IoShard>(*this, i));
    for (std::uint32_t i = 0; i < config_.workers; ++i) workers_.push_back(std::make_unique<WorkerShard>(*this, i));
}

Engine::~Engine() = default;

ConnectionId Engine::accept(std::string_view address) {
    if (live_connections_.fetch_add(1) >= config_.max_connections) {
        live_connections_.fetch_sub(1);
        throw ConnectionLimitReached();
    }
    const auto io = client_shard(address, config_.io_threads);
    const auto worker = client_shard(address, config_.workers);
    const auto id = make_connection_id(next_serial_.fetch_add(1), io, worker);
    // Both opens are queued before the transport can deliver any byte for `id`.
    rt_.io[io]->post([s = io_[io].get(), id] { s->open(id); });
    rt_.workers[worker]->post([s = workers_[worker].get(), id] { s->open(id); });
    return id;
}

void Engine::on_bytes(ConnectionId conn, std::span<const std::uint8_t> bytes) {
    io_[io_shard_of(conn)]->on_bytes(conn, bytes);
}

void Engine::on_disconnected(ConnectionId conn) { io_[io_shard_of(conn)]->on_disconnected(conn); }

bool Engine::append_and_deliver(const Message& m) {
    if (cache_.append(m) == TopicCache::AppendResult::Stale) {
        stats_.stale_appends.fetch_add(1, std::memory_order_relaxed);
        spdlog::debug("dropping stale append {} ({},{})", m.topic.str(), m.key.epoch, m.key.seq);
        return false;
    }
    auto shared = std::make_shared<const Message>(m);
    for (std::uint32_t i = 0; i < workers_.size(); ++i) {
        rt_.workers[i]->post([w = workers_[i].get(), shared] { w->deliver(shared); });
    }
    return true;
}

void Engine::send(ConnectionId conn, const wire::Frame& f) {
    send_bytes(conn, std::make_shared<const Bytes>(wire::encode_frame(f)));
}

void Engine::send_bytes(ConnectionId conn, std::shared_ptr<const Bytes> bytes) {
    io_exec(conn).post([s = io_[io_shard_of(conn)].get(), conn, b = std::move(bytes)]() mutable {
        s->send(conn, std::move(b));
    });
}

void Engine::close(ConnectionId conn, wire::CloseReason reason, std::string detail) {
    io_exec(conn).post([s = io_[io_shard_of(conn)].get(), conn, reason, d = std::move(detail)]() mutable {
        s->close(conn, reason, std::move(d));
    });
}

void Engine::close_all_clients(wire::CloseReason reason) {
    for (std::uint32_t i = 0; i < io_.size(); ++i) {
        rt_.io[i]->post([s = io_[i].get(), reason] { s->close_all(reason); });
    }
}

}  // namespace migrant::engine
