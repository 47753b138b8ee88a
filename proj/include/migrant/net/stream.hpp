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

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "migrant/core/types.hpp"
#include "migrant/runtime/executor.hpp"

namespace migrant::net {

using boost::asio::ip::tcp;

/// "host:port"; host may be a name or an IPv4 address.
struct HostPort {
    std::string host;
    std::uint16_t port = 0;
};

/// Throws InvalidArgument.
HostPort parse_host_port(const std::string& address);
tcp::endpoint resolve(const std::string& address);
std::string to_string(const tcp::endpoint& ep);

/// A TCP connection driven by its socket's io_context. All methods run on that context's thread.
class Stream : public std::enable_shared_from_this<Stream> {
public:
    using DataFn = std::function<void(std::span<const std::uint8_t>)>;
    using ClosedFn = std::function<void()>;

    explicit Stream(tcp::socket socket);
    ~Stream();

    /// Starts reading. `on_closed` runs once on EOF or error, never after close().
    void start(DataFn on_data, ClosedFn on_closed);

    /// Sends what the socket accepts now and queues the rest; returns the queued byte count.
    std::size_t write(std::span<const std::uint8_t> bytes);
    /// Closes once the queue is written, or after `linger`.
    void close_after_flush(rt::Duration linger = std::chrono::seconds(5));
    void close();

    bool is_open() const { return !closed_; }
    std::size_t backlog() const { return inflight_.size() + queued_.size(); }
    tcp::socket& socket() { return socket_; }

private:
    void read_more();
    void write_more();
    void fail();
    void shut();

    tcp::socket socket_;
    std::array<std::uint8_t, 64 * 1024> buf_{};
    Bytes inflight_;
    Bytes queued_;
    bool writing_ = false;
    bool closed_ = false;
    bool closing_ = false;
    bool user_closed_ = false;
    DataFn on_data_;
    ClosedFn on_closed_;
    std::unique_ptr<boost::asio::steady_timer> linger_;
};

}  // namespace migrant::net
