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

#include "migrant/client/link.hpp"
#include "migrant/net/event_loop.hpp"

namespace migrant::net {

/// client::Connector over TCP. Handler callbacks run on `loop`, which must be the
/// client's executor.
class TcpConnector final : public client::Connector {
public:
    explicit TcpConnector(EventLoop& loop) : loop_(loop) {}

    std::unique_ptr<client::Link> connect(const std::string& address, client::LinkHandler& handler) override;

private:
    EventLoop& loop_;
};

}  // namespace migrant::net
