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

#include <cstdint>
#include <string>
#include <vector>

#include "migrant/core/types.hpp"
#include "migrant/runtime/executor.hpp"

namespace migrant::simnet {

enum class Ev : std::uint8_t {
    Crash,
    Restart,
    Partition,
    Heal,
    DropNext,
    Won,
    Lost,
    Assign,
    Append,
    PubAck,
    PubNack,
    Gap,
    Reconcile,
    Fence,
    Ready,
    PeerUp,
    PeerDown,
    Connected,
    Disconnected,
    Publish,
    Acked,
    Failed,
    Deliver,
    Truncated,
    Subscribed,
};

const char* ev_name(Ev e) noexcept;

/// One entry of the global event trace. `node` is a server index for server events and
/// a client index for client events; the meaning of `aux` and `num` depends on the type.
struct TraceEvent {
    std::int64_t at_us = 0;
    Ev type = Ev::Append;
    std::uint32_t node = 0;
    std::uint32_t aux = 0;
    std::uint64_t num = 0;
    std::string topic;
    OrderKey key;
    MsgId id;
    std::uint64_t payload_hash = 0;
};

std::string to_string(const TraceEvent& e);

class Trace {
public:
    void add(TraceEvent e);
    const std::vector<TraceEvent>& events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    /// FNV-1a over every event, in order.
    std::uint64_t hash() const noexcept { return hash_; }

private:
    std::vector<TraceEvent> events_;
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::uint64_t payload_hash(const std::string& payload);

}  // namespace migrant::simnet
