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
#include <set>
#include <string>
#include <vector>

#include "migrant/net/event_loop.hpp"
#include "migrant/net/stream.hpp"
#include "migrant/wire/codec.hpp"

namespace migrant::net {

struct PeerAddress {
    ServerId id;
    std::string address;
};

struct PeerNetConfig {
    ServerId self;
    std::string listen_address;
    std::vector<PeerAddress> peers;  // excluding self
    rt::Duration redial = std::chrono::milliseconds(200);
    /// An outbound link with more queued bytes than this is reset.
    std::size_t max_backlog = 64u << 20;
};

/// Server-to-server links. Each server dials every peer and sends only on its own
/// outbound connection; inbound connections announce themselves with CONNECT(role=server).
/// Frames sent while a link is down are dropped. Runs on one loop.
class PeerNet {
public:
    using FrameFn = std::function<void(ServerId from, wire::Frame frame)>;

    PeerNet(EventLoop& loop, PeerNetConfig config, FrameFn on_frame);
    ~PeerNet();

    /// Binds the peer listener and starts dialing; returns the bound port.
    std::uint16_t start();
    /// Call from outside the loop.
    void stop();

    /// Loop thread only.
    void send(ServerId to, const wire::Frame& frame);
    bool connected(ServerId to) const;

private:
    struct Outbound {
        std::string address;
        std::shared_ptr<Stream> stream;
        bool up = false;
        bool dialing = false;
    };
    struct Inbound {
        std::shared_ptr<Stream> stream;
        wire::DecodeBuffer decoder;
        std::optional<ServerId> from;
    };

    void accept_next();
    void dial(ServerId id);
    void redial_later(ServerId id);
    void on_inbound(std::uint64_t key, std::span<const std::uint8_t> bytes);

    EventLoop& loop_;
    PeerNetConfig config_;
    FrameFn on_frame_;
    bool stopped_ = false;
    std::unique_ptr<tcp::acceptor> acceptor_;
    std::map<ServerId, Outbound> out_;
    std::map<std::uint64_t, Inbound> in_;
    std::uint64_t next_in_ = 1;
};

}  // namespace migrant::net
