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

#include "migrant/net/peer_net.hpp"

#include <spdlog/spdlog.h>

namespace migrant::net {

using boost::system::error_code;

PeerNet::PeerNet(EventLoop& loop, PeerNetConfig config, FrameFn on_frame)
    : loop_(loop), config_(std::move(config)), on_frame_(std::move(on_frame)) {
    for (const auto& p : config_.peers) {
        if (p.id == config_.self) continue;
        out_[p.id].address = p.address;
    }
}

PeerNet::~PeerNet() = default;

std::uint16_t PeerNet::start() {
    const auto ep = resolve(config_.listen_address);
    acceptor_ = std::make_unique<tcp::acceptor>(loop_.context());
    acceptor_->open(ep.protocol());
    acceptor_->set_option(tcp::acceptor::reuse_address(true));
    acceptor_->bind(ep);
    acceptor_->listen(64);
    const auto port = acceptor_->local_endpoint().port();
    loop_.post([this] {
        accept_next();
        for (auto& [id, o] : out_) dial(id);
    });
    return port;
}

void PeerNet::stop() {
    loop_.run_sync([this] {
        stopped_ = true;
        error_code ec;
        if (acceptor_) acceptor_->close(ec);
        for (auto& [id, o] : out_) {
            if (o.stream) o.stream->close();
            o.stream.reset();
            o.up = false;
        }
        for (auto& [k, in] : in_) in.stream->close();
        in_.clear();
    });
}

void PeerNet::accept_next() {
    acceptor_->async_accept([this](const error_code& ec, tcp::socket socket) {
        if (stopped_ || ec == boost::asio::error::operation_aborted) return;
        if (!ec) {
            const auto key = next_in_++;
            auto& in = in_[key];
            in.stream = std::make_shared<Stream>(std::move(socket));
            in.stream->start([this, key](std::span<const std::uint8_t> b) { on_inbound(key, b); },
                             [this, key] { in_.erase(key); });
        }
        accept_next();
    });
}

void PeerNet::on_inbound(std::uint64_t key, std::span<const std::uint8_t> bytes) {
    auto it = in_.find(key);
    if (it == in_.end()) return;
    std::vector<wire::Frame> frames;
    try {
        frames = it->second.decoder.decode_frames(bytes);
    } catch (const std::exception& e) {
        spdlog::warn("peer link: {}", e.what());
        it->second.stream->close();
        in_.erase(it);
        return;
    }
    for (auto& f : frames) {
        it = in_.find(key);
        if (it == in_.end()) return;
        auto& in = it->second;
        if (!in.from) {
            const auto* c = std::get_if<wire::Connect>(&f);
            if (!c || c->role != wire::Role::Server || !out_.count(c->server)) {
                spdlog::warn("peer link: expected CONNECT from a known server");
                in.stream->close();
                in_.erase(it);
                return;
            }
            in.from = c->server;
            continue;
        }
        on_frame_(*in.from, std::move(f));
    }
}

void PeerNet::dial(ServerId id) {
    auto& o = out_.at(id);
    if (stopped_ || o.dialing) return;
    o.dialing = true;
    o.up = false;
    tcp::endpoint ep;
    try {
        ep = resolve(o.address);
    } catch (const std::exception& e) {
        spdlog::warn("peer {}: {}", id.id, e.what());
        o.dialing = false;
        redial_later(id);
        return;
    }
    auto sock = std::make_shared<tcp::socket>(loop_.context());
    sock->async_connect(ep, [this, id, sock](const error_code& ec) {
        if (stopped_) return;
        auto& o = out_.at(id);
        o.dialing = false;
        if (ec) {
            redial_later(id);
            return;
        }
        o.stream = std::make_shared<Stream>(std::move(*sock));
        auto stream = o.stream;
        o.up = true;
        stream->start([](std::span<const std::uint8_t>) {},
                      [this, id, stream] {
                          auto& o = out_.at(id);
                          if (o.stream != stream) return;
                          o.stream.reset();
                          o.up = false;
                          redial_later(id);
                      });
        wire::Connect hello;
        hello.role = wire::Role::Server;
        hello.server = config_.self;
        stream->write(wire::encode_frame(hello));
    });
}

void PeerNet::redial_later(ServerId id) {
    if (stopped_) return;
    loop_.post_after(config_.redial, [this, id] {
        if (!stopped_ && !out_.at(id).up) dial(id);
    });
}

void PeerNet::send(ServerId to, const wire::Frame& frame) {
    auto it = out_.find(to);
    if (it == out_.end() || !it->second.up) return;
    auto& o = it->second;
    if (o.stream->write(wire::encode_frame(frame)) > config_.max_backlog) {
        spdlog::warn("peer {}: send queue over limit, resetting link", to.id);
        o.stream->close();
        o.stream.reset();
        o.up = false;
        redial_later(to);
    }
}

bool PeerNet::connected(ServerId to) const {
    auto it = out_.find(to);
    return it != out_.end() && it->second.up;
}

}  // namespace migrant::net
