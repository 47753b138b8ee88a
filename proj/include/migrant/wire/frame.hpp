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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "migrant/core/types.hpp"

namespace migrant::wire {

/// On-wire kind byte. Values are part of the protocol; never renumber.
enum class Kind : std::uint8_t {
    Connect = 1,
    ConnAck = 2,
    Subscribe = 3,
    SubAck = 4,
    Publish = 5,
    PubAck = 6,
    PubNack = 7,
    Notify = 8,
    Recover = 9,
    RecoverEnd = 10,
    Ping = 11,
    Pong = 12,
    Replicate = 13,
    ReplAck = 14,
    CoordGossip = 15,
    ReconcileReq = 16,
    ReconcileRsp = 17,
    Close = 18,
    Kv = 19,
};

inline constexpr std::uint8_t kMinKind = 1;
inline constexpr std::uint8_t kMaxKind = 19;

const char* kind_name(Kind k) noexcept;

enum class Role : std::uint8_t { Client = 0, Server = 1 };

struct Connect {
    Role role = Role::Client;
    ServerId server{ServerId::kNone};  // meaningful for Role::Server
    std::string client_name;
    friend bool operator==(const Connect&, const Connect&) = default;
};

enum class ConnStatus : std::uint8_t { Accepted = 0, Refused = 1 };

struct ConnAck {
    ServerId server{ServerId::kNone};
    ConnStatus status = ConnStatus::Accepted;
    friend bool operator==(const ConnAck&, const ConnAck&) = default;
};

struct Subscribe {
    static constexpr std::uint8_t kRecover = 0x01;

    TopicName topic;
    /// When false the subscription starts from now on and `resume` must be (0,0).
    bool recover = false;
    OrderKey resume;
    friend bool operator==(const Subscribe&, const Subscribe&) = default;
};

struct SubAck {
    TopicName topic;
    /// Newest key cached for the topic at subscription time, (0,0) when empty.
    OrderKey head;
    friend bool operator==(const SubAck&, const SubAck&) = default;
};

struct Publish {
    static constexpr std::uint8_t kAckRequested = 0x01;

    TopicName topic;
    MsgId msg_id;
    bool ack_requested = false;
    std::string payload;
    friend bool operator==(const Publish&, const Publish&) = default;
};

struct PubAck {
    MsgId msg_id;
    friend bool operator==(const PubAck&, const PubAck&) = default;
};

enum class NackReason : std::uint8_t {
    NotCoordinator = 1,
    ElectionLost = 2,
    Timeout = 3,
    Unavailable = 4,
};

struct PubNack {
    MsgId msg_id;
    NackReason reason = NackReason::Unavailable;
    ServerId coordinator_hint{ServerId::kNone};
    friend bool operator==(const PubNack&, const PubNack&) = default;
};

/// Live notification to a subscriber.
struct Notify {
    Message message;
    friend bool operator==(const Notify&, const Notify&) = default;
};

/// Replayed cached message, sent in response to a recovering SUBSCRIBE.
struct Recover {
    Message message;
    friend bool operator==(const Recover&, const Recover&) = default;
};

/// Sent ahead of a replay when the requested resume point is older than the cache horizon.
struct RecoverEnd {
    TopicName topic;
    bool truncated = false;
    friend bool operator==(const RecoverEnd&, const RecoverEnd&) = default;
};

struct Ping {
    friend bool operator==(const Ping&, const Ping&) = default;
};

struct Pong {
    friend bool operator==(const Pong&, const Pong&) = default;
};

struct Replicate {
    Message message;
    friend bool operator==(const Replicate&, const Replicate&) = default;
};

struct ReplAck {
    TopicName topic;
    OrderKey key;
    friend bool operator==(const ReplAck&, const ReplAck&) = default;
};

struct CoordGossip {
    GroupId group;
    ServerId coordinator;
    std::uint64_t epoch = 0;
    friend bool operator==(const CoordGossip&, const CoordGossip&) = default;
};

inline constexpr std::uint32_t kAllGroups = 0xFFFFFFFFu;

struct TopicKey {
    TopicName topic;
    OrderKey key;
    friend bool operator==(const TopicKey&, const TopicKey&) = default;
};

/// Request for cached messages of one group (or kAllGroups) newer than `known`.
/// Topics of the group that are absent from `known` are requested in full.
struct ReconcileReq {
    std::uint64_t request_id = 0;
    std::uint32_t group = kAllGroups;
    std::vector<TopicKey> known;
    friend bool operator==(const ReconcileReq&, const ReconcileReq&) = default;
};

/// One chunk of a reconciliation answer. `heads` carries the responder's newest key
/// per topic of the group; `truncated` lists topics whose eviction horizon lies past
/// the requested point (key = newest evicted key).
struct ReconcileRsp {
    std::uint64_t request_id = 0;
    std::uint32_t group = kAllGroups;
    bool last_chunk = true;
    std::vector<Message> messages;
    std::vector<TopicKey> heads;
    std::vector<TopicKey> truncated;
    friend bool operator==(const ReconcileRsp&, const ReconcileRsp&) = default;
};

enum class CloseReason : std::uint8_t {
    Normal = 0,
    ProtocolViolation = 1,
    Malformed = 2,
    SlowConsumer = 3,
    Fenced = 4,
    Refused = 5,
    ConnectionLimit = 6,
};

struct Close {
    CloseReason reason = CloseReason::Normal;
    std::string detail;
    friend bool operator==(const Close&, const Close&) = default;
};

/// Opaque coordination-service traffic between servers.
struct Kv {
    std::string body;
    friend bool operator==(const Kv&, const Kv&) = default;
};

using Frame = std::variant<Connect, ConnAck, Subscribe, SubAck, Publish, PubAck, PubNack, Notify,
                           Recover, RecoverEnd, Ping, Pong, Replicate, ReplAck, CoordGossip,
                           ReconcileReq, ReconcileRsp, Close, Kv>;

Kind kind_of(const Frame& f) noexcept;

}  // namespace migrant::wire
