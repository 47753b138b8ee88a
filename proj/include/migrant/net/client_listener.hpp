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

#include <memory>
#include <unordered_map>
#include <vector>

#include "migrant/engine/engine.hpp"
#include "migrant/net/event_loop.hpp"
#include "migrant/net/stream.hpp"

namespace migrant::net {

/// Client-facing TCP transport of an Engine. Accepts on one loop and hands each socket
/// to the loop of its IoShard; io_loops[i] must be the engine's io executor i.
class ClientListener final : public engine::ClientTransport {
public:
    ClientListener(EventLoop& accept_loop, std::vector<EventLoop*> io_loops);
    ~ClientListener() override;

    void attach(engine::Engine& engine) { engine_ = &engine; }
    /// Binds and starts accepting; returns the bound port.
    std::uint16_t listen(const std::string& address);
    /// Stops accepting and drops every connection. Call from outside the loops.
    void stop();

    std::size_t write(engine::ConnectionId conn, Bytes bytes) override;
    void close(engine::ConnectionId conn) override;

private:
    struct Shard {
        std::unordered_map<engine::ConnectionId, std::shared_ptr<Stream>> conns;
    };

    void accept_next();
    void adopt(engine::ConnectionId conn, tcp::socket::native_handle_type fd);

    EventLoop& accept_loop_;
    std::vector<EventLoop*> io_loops_;
    std::vector<Shard> shards_;
    engine::Engine* engine_ = nullptr;
    std::unique_ptr<tcp::acceptor> acceptor_;
};

}  // namespace migrant::net
