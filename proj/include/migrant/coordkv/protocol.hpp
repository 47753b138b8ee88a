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

#include <span>
#include <variant>
#include <vector>

#include "migrant/core/types.hpp"
#include "migrant/coordkv/types.hpp"

namespace migrant::coordkv::proto {

struct LogEntry {
    std::uint64_t term = 0;
    Command cmd;
};

struct VoteRequest {
    std::uint64_t term = 0;
    bool pre = false;
    std::uint64_t last_index = 0;
    std::uint64_t last_term = 0;
};

struct VoteReply {
    std::uint64_t term = 0;
    bool pre = false;
    bool granted = false;
};

struct AppendRequest {
    std::uint64_t term = 0;
    std::uint64_t prev_index = 0;
    std::uint64_t prev_term = 0;
    std::uint64_t commit = 0;
    std::vector<LogEntry> entries;
};

struct AppendReply {
    std::uint64_t term = 0;
    bool success = false;
    std::uint64_t match_index = 0;  // on failure: highest index the leader may retry from
};

struct Forward {
    Command cmd;
};

struct KeepAlive {
    SessionId session;
    std::uint64_t seq = 0;
};

struct KeepAliveReply {
    SessionId session;
    std::uint64_t seq = 0;
    bool live = false;
};

using Message = std::variant<VoteRequest, VoteReply, AppendRequest, AppendReply, Forward, KeepAlive, KeepAliveReply>;

Bytes encode(const Message& m);

/// Throws wire::MalformedFrame.
Message decode(std::span<const std::uint8_t> bytes);

}  // namespace migrant::coordkv::proto
