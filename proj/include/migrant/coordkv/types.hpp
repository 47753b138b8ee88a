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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace migrant::coordkv {

/// A server's liveness lease. `nonce` distinguishes incarnations of the same owner.
struct SessionId {
    std::uint32_t owner = 0;
    std::uint64_t nonce = 0;

    auto operator<=>(const SessionId&) const = default;
};

enum class Status : std::uint8_t {
    Ok = 0,
    Created = 1,
    AlreadyExists = 2,
    Conflict = 3,
    SessionExpired = 4,
    NotOwner = 5,
    Absent = 6,
};

const char* status_name(Status s) noexcept;

struct Result {
    Status status = Status::Ok;
    std::uint64_t current = 0;  // counter value for cas_counter results

    bool operator==(const Result&) const = default;
};

struct Entry {
    std::string value;
    std::uint64_t version = 0;
    std::optional<SessionId> ephemeral_owner;

    bool operator==(const Entry&) const = default;
};

enum class EventType : std::uint8_t { Created, Changed, Deleted };

struct WatchEvent {
    std::string key;
    EventType type = EventType::Changed;
    std::optional<Entry> entry;  // state after the event; empty on Deleted
};

struct OpenSession {
    SessionId session;
};
struct CreateEphemeral {
    std::string key;
    std::string value;
    SessionId session;
};
struct DeleteEphemeral {
    std::string key;
    SessionId session;
};
struct CasCounter {
    std::string key;
    std::uint64_t expected = 0;
    std::uint64_t desired = 0;
};
struct ExpireSession {
    SessionId session;
};
struct Noop {};

using Op = std::variant<Noop, OpenSession, CreateEphemeral, DeleteEphemeral, CasCounter, ExpireSession>;

/// A replicated request. (origin, incarnation, req_id) identifies it for deduplication;
/// req_id 0 marks internal commands nobody waits for.
struct Command {
    std::uint32_t origin = 0;
    std::uint64_t incarnation = 0;
    std::uint64_t req_id = 0;
    Op op;
};

}  // namespace migrant::coordkv
