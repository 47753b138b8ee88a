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

#include "migrant/net/client_listener.hpp"

#include <unistd.h>

#include <spdlog/spdlog.h>

namespace migrant::net {

using boost::system::error_code;

ClientListener::ClientListener(EventLoop& accept_loop, std::vector<EventLoop*> io_loops)
    : accept_loop_(accept_loop), io_loops_(std::move(io_loops)), shards_(io_loops_.size()) {}

ClientListener::~ClientListener() = default;

std::uint16_t ClientListener::listen(const std::string& address) {
    if (!engine_) throw InvalidArgument("listener has no engine");
    const auto ep = resolve(address);
    acceptor_ = std::make_unique<tcp::acceptor>(accept_loop_.context());
    acceptor_->open(ep.protocol());
    acceptor_->set_option(tcp::acceptor::reuse_address(true));
    acceptor_->bind(ep);
    acceptor_->listen(4096);
    const auto port = acceptor_->local_endpoint().port();
    accept_loop_.post([this] { accept_next(); });
    return port;
}

void ClientListener::accept_next() {
    acceptor_->async_accept([this](const error_code& ec, tcp::socket socket) {
        if (ec == boost::asio::error::operation_aborted || !acceptor_->is_open()) return;
        if (ec) {
            spdlog::warn("accept failed: {}", ec.message());
            // Out of descriptors: back off instead of spinning.
            accept_loop_.post_after(std::chrono::milliseconds(50), [this] {
                if (acceptor_ && acceptor_->is_open()) accept_next();
            });
            return;
        }
        error_code e2;
        const auto remote = socket.remote_endpoint(e2);
        if (!e2) {
            try {
                const auto conn = engine_->accept(to_string(remote));
                adopt(conn, socket.release());
            } catch (const engine::ConnectionLimitReached&) {
                socket.close(e2);
            }
        }
        accept_next();
    });
}

void ClientListener::adopt(engine::ConnectionId conn, tcp::socket::native_handle_type fd) {
    const auto shard = engine::io_shard_of(conn);
    auto* loop = io_loops_.at(shard);
    loop->post([this, conn, fd, shard, loop] {
        error_code ec;
        tcp::socket s(loop->context());
        s.assign(tcp::v4(), fd, ec);
        if (ec) {
            ::close(fd);
            engine_->on_disconnected(conn);
            return;
        }
        auto stream = std::make_shared<Stream>(std::move(s));
        shards_[shard].conns[conn] = stream;
        stream->start([this, conn](std::span<const std::uint8_t> b) { engine_->on_bytes(conn, b); },
                      [this, conn, shard] {
                          shards_[shard].conns.erase(conn);
                          engine_->on_disconnected(conn);
                      });
    });
}

std::size_t ClientListener::write(engine::ConnectionId conn, Bytes bytes) {
    auto& m = shards_[engine::io_shard_of(conn)].conns;
    auto it = m.find(conn);
    if (it == m.end()) return 0;
    return it->second->write(bytes);
}

void ClientListener::close(engine::ConnectionId conn) {
    auto& m = shards_[engine::io_shard_of(conn)].conns;
    auto it = m.find(conn);
    if (it == m.end()) return;
    it->second->close_after_flush();
    m.erase(it);
}

void ClientListener::stop() {
    if (acceptor_) {
        accept_loop_.run_sync([this] {
            error_code ec;
            acceptor_->close(ec);
        });
    }
    for (std::size_t i = 0; i < io_loops_.size(); ++i) {
        io_loops_[i]->run_sync([this, i] {
            for (auto& [conn, s] : shards_[i].conns) s->close();
            shards_[i].conns.clear();
        });
    }
}

}  // namespace migrant::net
