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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "migrant/engine/engine.hpp"
#include "migrant/runtime/virtual_scheduler.hpp"

namespace migrant::testing {

class RecordingTransport final : public engine::ClientTransport {
public:
    std::size_t write(engine::ConnectionId conn, Bytes bytes) override {
        writes[conn].push_back(std::move(bytes));
        auto it = backlog.find(conn);
        return it == backlog.end() ? 0 : it->second;
    }
    void close(engine::ConnectionId conn) override { closed.insert(conn); }

    std::vector<wire::Frame> frames(engine::ConnectionId conn) const {
        wire::DecodeBuffer buf;
        std::vector<wire::Frame> out;
        auto it = writes.find(conn);
        if (it == writes.end()) return out;
        for (const auto& w : it->second) {
            auto fs = buf.decode_frames(w);
            out.insert(out.end(), fs.begin(), fs.end());
        }
        return out;
    }

    template <class T>
    std::vector<T> frames_of(engine::ConnectionId conn) const {
        std::vector<T> out;
        for (auto& f : frames(conn)) {
            if (auto* p = std::get_if<T>(&f)) out.push_back(*p);
        }
        return out;
    }

    std::map<engine::ConnectionId, std::vector<Bytes>> writes;
    std::map<engine::ConnectionId, std::size_t> backlog;
    std::set<engine::ConnectionId> closed;
};

/// Assigns keys locally, like the cluster's single-server mode, and records arrivals.
class LocalSequencer final : public engine::PublicationHandler {
public:
    explicit LocalSequencer(engine::Engine& e) : engine_(e) {}

    void on_client_publish(engine::ConnectionId conn, wire::Publish p) override {
        received.emplace_back(conn, p);
        auto& seq = next_[p.topic];
        Message m{p.topic, OrderKey{1, ++seq}, p.payload, p.msg_id};
        engine_.append_and_deliver(m);
        if (p.ack_requested) engine_.send(conn, wire::PubAck{p.msg_id});
    }

    std::vector<std::pair<engine::ConnectionId, wire::Publish>> received;

private:
    engine::Engine& engine_;
    std::map<TopicName, std::uint64_t> next_;
};

struct EngineHarness {
    explicit EngineHarness(engine::EngineConfig cfg = {}) : engine(cfg, make_runtime(cfg)), sequencer(engine) {
        engine.set_publication_handler(&sequencer);
    }

    engine::EngineRuntime make_runtime(const engine::EngineConfig& cfg) {
        engine::EngineRuntime r;
        r.clock = &sched;
        r.io.assign(cfg.io_threads, &exec);
        r.workers.assign(cfg.workers, &exec);
        r.control = &exec;
        r.transport = &transport;
        return r;
    }

    engine::ConnectionId open(const std::string& address) {
        auto id = engine.accept(address);
        sched.run_all();
        return id;
    }

    engine::ConnectionId connect(const std::string& address) {
        auto id = open(address);
        send(id, wire::Connect{wire::Role::Client, ServerId{ServerId::kNone}, address});
        return id;
    }

    void send(engine::ConnectionId conn, const wire::Frame& f) { send_raw(conn, wire::encode_frame(f)); }

    void send_raw(engine::ConnectionId conn, Bytes bytes) {
        exec.post([this, conn, b = std::move(bytes)] { engine.on_bytes(conn, b); });
        sched.run_all();
    }

    void publish_local(const std::string& topic, std::uint64_t epoch, std::uint64_t seq, std::string payload = "p") {
        engine.append_and_deliver(Message{TopicName(topic), OrderKey{epoch, seq}, std::move(payload), {}});
        sched.run_all();
    }

    rt::VirtualScheduler sched;
    rt::VirtualExecutor exec{sched};
    RecordingTransport transport;
    engine::Engine engine;
    LocalSequencer sequencer;
};

}  // namespace migrant::testing
