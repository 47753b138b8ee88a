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

#include "migrant/net/tcp_connector.hpp"

#include "migrant/net/stream.hpp"

namespace migrant::net {

using boost::system::error_code;

namespace {

struct LinkState {
    tcp::socket socket;
    std::shared_ptr<Stream> stream;
    client::LinkHandler* handler = nullptr;
    bool closed = false;
    Bytes early;  // written before the connection completed

    explicit LinkState(boost::asio::io_context& ctx) : socket(ctx) {}
};

class TcpLink final : public client::Link {
public:
    explicit TcpLink(std::shared_ptr<LinkState> s) : s_(std::move(s)) {}
    ~TcpLink() override { close(); }

    void send(Bytes bytes) override {
        if (s_->closed) return;
        if (!s_->stream) {
            s_->early.insert(s_->early.end(), bytes.begin(), bytes.end());
            return;
        }
        s_->stream->write(bytes);
    }

    void close() override {
        if (s_->closed) return;
        s_->closed = true;
        s_->handler = nullptr;
        if (s_->stream) {
            s_->stream->close_after_flush(std::chrono::seconds(1));
        } else {
            error_code ec;
            s_->socket.close(ec);
        }
    }

private:
    std::shared_ptr<LinkState> s_;
};

}  // namespace

std::unique_ptr<client::Link> TcpConnector::connect(const std::string& address, client::LinkHandler& handler) {
    auto s = std::make_shared<LinkState>(loop_.context());
    s->handler = &handler;
    tcp::endpoint ep;
    try {
        ep = resolve(address);
    } catch (const std::exception&) {
        loop_.post([s] {
            if (s->handler) s->handler->on_link_closed();
        });
        return std::make_unique<TcpLink>(s);
    }
    s->socket.async_connect(ep, [s](const error_code& ec) {
        if (s->closed) return;
        if (ec) {
            if (s->handler) s->handler->on_link_closed();
            return;
        }
        s->stream = std::make_shared<Stream>(std::move(s->socket));
        std::weak_ptr<LinkState> w = s;
        s->stream->start(
            [w](std::span<const std::uint8_t> b) {
                auto s = w.lock();
                if (s && !s->closed && s->handler) s->handler->on_link_bytes(b);
            },
            [w] {
                auto s = w.lock();
                if (!s || s->closed) return;
                s->closed = true;
                if (auto* h = s->handler) h->on_link_closed();
            });
        if (!s->early.empty()) {
            s->stream->write(s->early);
            s->early.clear();
        }
        if (s->handler) s->handler->on_link_open();
    });
    return std::make_unique<TcpLink>(s);
}

}  // namespace migrant::net
