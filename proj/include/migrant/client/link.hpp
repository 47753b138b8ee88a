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
#include <span>
#include <string>

#include "migrant/core/types.hpp"

namespace migrant::client {

/// Callbacks of one connection attempt, delivered on the client's executor.
class LinkHandler {
public:
    virtual ~LinkHandler() = default;
    virtual void on_link_open() = 0;
    virtual void on_link_bytes(std::span<const std::uint8_t> bytes) = 0;
    /// Connection refused, reset or closed by the server. Not called after Link::close().
    virtual void on_link_closed() = 0;
};

/// A byte stream to one server. Destroying it closes it.
class Link {
public:
    virtual ~Link() = default;
    virtual void send(Bytes bytes) = 0;
    /// Closes the connection; no handler callback runs afterwards.
    virtual void close() = 0;
};

class Connector {
public:
    virtual ~Connector() = default;
    virtual std::unique_ptr<Link> connect(const std::string& address, LinkHandler& handler) = 0;
};

}  // namespace migrant::client
