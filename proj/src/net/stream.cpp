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

#include "migrant/net/stream.hpp"

#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <charconv>

namespace migrant::net {

namespace asio = boost::asio;
using boost::system::error_code;

HostPort parse_host_port(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon + 1 == address.size())
        throw InvalidArgument("address must be host:port: '" + address + "'");
    HostPort hp;
    hp.host = address.substr(0, colon);
    if (hp.host.empty()) hp.host = "0.0.0.0";
    unsigned port = 0;
    const auto* first = address.data() + colon + 1;
    const auto* last = address.data() + address.size();
    auto [p, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || p != last || port > 65535) throw InvalidArgument("bad port in '" + address + "'");
    hp.port = static_cast<std::uint16_t>(port);
    return hp;
}

tcp::endpoint resolve(const std::string& address) {
    const auto hp = parse_host_port(address);
    error_code ec;
    const auto ip = asio::ip::make_address(hp.host, ec);
    if (!ec) return {ip, hp.port};
    asio::io_context ctx;
    tcp::resolver resolver(ctx);
    auto results = resolver.resolve(tcp::v4(), hp.host, std::to_string(hp.port), ec);
    if (ec || results.empty()) throw InvalidArgument("cannot resolve '" + hp.host + "': " + ec.message());
    return results.begin()->endpoint();
}

std::string to_string(const tcp::endpoint& ep) { return ep.address().to_string() + ":" + std::to_string(ep.port()); }

Stream::Stream(tcp::socket socket) : socket_(std::move(socket)) {
    error_code ec;
    socket_.set_option(tcp::no_delay(true), ec);
    socket_.non_blocking(true, ec);
}

Stream::~Stream() {
    error_code ec;
    socket_.close(ec);
}

void Stream::start(DataFn on_data, ClosedFn on_closed) {
    on_data_ = std::move(on_data);
    on_closed_ = std::move(on_closed);
    read_more();
}

void Stream::read_more() {
    socket_.async_read_some(asio::buffer(buf_), [self = shared_from_this()](const error_code& ec, std::size_t n) {
        if (self->closed_) return;
        if (ec) {
            self->fail();
            return;
        }
        if (self->on_data_) self->on_data_(std::span<const std::uint8_t>(self->buf_.data(), n));
        if (!self->closed_) self->read_more();
    });
}

std::size_t Stream::write(std::span<const std::uint8_t> bytes) {
    if (closed_ || closing_) return backlog();
    if (!writing_ && queued_.empty()) {
        error_code ec;
        const auto n = socket_.write_some(asio::buffer(bytes.data(), bytes.size()), ec);
        if (ec && ec != asio::error::would_block && ec != asio::error::try_again) {
            asio::post(socket_.get_executor(), [self = shared_from_this()] { self->fail(); });
            return 0;
        }
        bytes = bytes.subspan(ec ? 0 : n);
        if (bytes.empty()) return 0;
    }
    queued_.insert(queued_.end(), bytes.begin(), bytes.end());
    if (!writing_) write_more();
    return backlog();
}

void Stream::write_more() {
    if (queued_.empty()) {
        if (closing_) shut();
        return;
    }
    writing_ = true;
    inflight_.swap(queued_);
    queued_.clear();
    asio::async_write(socket_, asio::buffer(inflight_), [self = shared_from_this()](const error_code& ec, std::size_t) {
        self->writing_ = false;
        self->inflight_.clear();
        if (self->closed_) return;
        if (ec) {
            self->fail();
            return;
        }
        self->write_more();
    });
}

void Stream::close_after_flush(rt::Duration linger) {
    if (closed_ || closing_) return;
    user_closed_ = true;
    closing_ = true;
    if (!writing_) {
        shut();
        return;
    }
    linger_ = std::make_unique<asio::steady_timer>(socket_.get_executor(), linger);
    linger_->async_wait([self = shared_from_this()](const error_code& ec) {
        if (!ec) self->shut();
    });
}

void Stream::close() {
    user_closed_ = true;
    shut();
}

void Stream::fail() {
    if (closed_) return;
    shut();
    if (!user_closed_ && on_closed_) {
        auto fn = std::move(on_closed_);
        fn();
    }
}

void Stream::shut() {
    if (closed_) return;
    closed_ = true;
    error_code ec;
    socket_.shutdown(tcp::socket::shutdown_send, ec);
    socket_.close(ec);
    if (linger_) linger_->cancel();
    // Callbacks may own this stream; release them from a fresh stack.
    asio::post(socket_.get_executor(), [self = shared_from_this()] {
        self->on_data_ = nullptr;
        self->on_closed_ = nullptr;
    });
}

}  // namespace migrant::net
