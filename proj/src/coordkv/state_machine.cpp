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

#include "migrant/coordkv/state_machine.hpp"

#include <charconv>

namespace migrant::coordkv {

const char* status_name(Status s) noexcept {
    switch (s) {
        case Status::Ok: return "Ok";
        case Status::Created: return "Created";
        case Status::AlreadyExists: return "AlreadyExists";
        case Status::Conflict: return "Conflict";
        case Status::SessionExpired: return "SessionExpired";
        case Status::NotOwner: return "NotOwner";
        case Status::Absent: return "Absent";
    }
    return "?";
}

std::uint64_t parse_counter(const std::string& value) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) return 0;
    return v;
}

StateMachine::Applied StateMachine::apply(const Command& cmd) {
    Applied out;
    const auto id = std::make_tuple(cmd.origin, cmd.incarnation, cmd.req_id);
    if (cmd.req_id != 0) {
        if (auto it = applied_.find(id); it != applied_.end()) {
            out.result = it->second;
            out.duplicate = true;
            return out;
        }
    }
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, Noop>) {
                out.result = {Status::Ok, 0};
            } else if constexpr (std::is_same_v<T, OpenSession>) {
                sessions_.try_emplace(op.session);
                out.result = {Status::Ok, 0};
            } else if constexpr (std::is_same_v<T, CreateEphemeral>) {
                out.result = create(op, out.events);
            } else if constexpr (std::is_same_v<T, DeleteEphemeral>) {
                out.result = remove(op, out.events);
            } else if constexpr (std::is_same_v<T, CasCounter>) {
                out.result = cas(op, out.events);
            } else if constexpr (std::is_same_v<T, ExpireSession>) {
                out.result = expire(op.session, out.events);
            }
        },
        cmd.op);
    if (cmd.req_id != 0) applied_.emplace(id, out.result);
    return out;
}

std::optional<Entry> StateMachine::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::vector<SessionId> StateMachine::sessions() const {
    std::vector<SessionId> out;
    for (const auto& [s, keys] : sessions_) out.push_back(s);
    return out;
}

Result StateMachine::create(const CreateEphemeral& c, std::vector<WatchEvent>& ev) {
    auto s = sessions_.find(c.session);
    if (s == sessions_.end()) return {Status::SessionExpired, 0};
    if (entries_.count(c.key)) return {Status::AlreadyExists, 0};
    Entry e{c.value, next_version(c.key), c.session};
    entries_.emplace(c.key, e);
    s->second.insert(c.key);
    ev.push_back({c.key, EventType::Created, e});
    return {Status::Created, 0};
}

Result StateMachine::remove(const DeleteEphemeral& d, std::vector<WatchEvent>& ev) {
    auto it = entries_.find(d.key);
    if (it == entries_.end()) return {Status::Absent, 0};
    if (it->second.ephemeral_owner != d.session) return {Status::NotOwner, 0};
    sessions_[d.session].erase(d.key);
    entries_.erase(it);
    next_version(d.key);
    ev.push_back({d.key, EventType::Deleted, std::nullopt});
    return {Status::Ok, 0};
}

Result StateMachine::cas(const CasCounter& c, std::vector<WatchEvent>& ev) {
    auto it = entries_.find(c.key);
    if (it != entries_.end() && it->second.ephemeral_owner) return {Status::Conflict, 0};
    std::uint64_t current = it == entries_.end() ? 0 : parse_counter(it->second.value);
    if (current != c.expected) return {Status::Conflict, current};
    Entry e{std::to_string(c.desired), next_version(c.key), std::nullopt};
    const bool existed = it != entries_.end();
    entries_[c.key] = e;
    ev.push_back({c.key, existed ? EventType::Changed : EventType::Created, e});
    return {Status::Ok, c.desired};
}

Result StateMachine::expire(SessionId s, std::vector<WatchEvent>& ev) {
    auto it = sessions_.find(s);
    if (it == sessions_.end()) return {Status::Absent, 0};
    for (const auto& key : it->second) {
        entries_.erase(key);
        next_version(key);
        ev.push_back({key, EventType::Deleted, std::nullopt});
    }
    sessions_.erase(it);
    return {Status::Ok, 0};
}

}  // namespace migrant::coordkv
