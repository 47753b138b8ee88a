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

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "migrant/coordkv/types.hpp"

namespace migrant::coordkv {

/// Counter values are stored as decimal strings so they read like any other entry.
std::uint64_t parse_counter(const std::string& value);

/// Deterministic KV state machine replicated by every Node.
class StateMachine {
public:
    struct Applied {
        Result result;
        std::vector<WatchEvent> events;
        bool duplicate = false;
    };

    Applied apply(const Command& cmd);

    std::optional<Entry> get(const std::string& key) const;
    bool session_live(SessionId s) const { return sessions_.count(s) != 0; }
    std::vector<SessionId> sessions() const;
    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    Result create(const CreateEphemeral& c, std::vector<WatchEvent>& ev);
    Result remove(const DeleteEphemeral& d, std::vector<WatchEvent>& ev);
    Result cas(const CasCounter& c, std::vector<WatchEvent>& ev);
    Result expire(SessionId s, std::vector<WatchEvent>& ev);
    std::uint64_t next_version(const std::string& key) { return ++versions_[key]; }

    std::map<std::string, Entry> entries_;
    std::map<std::string, std::uint64_t> versions_;
    std::map<SessionId, std::set<std::string>> sessions_;
    std::map<std::tuple<std::uint32_t, std::uint64_t, std::uint64_t>, Result> applied_;
};

}  // namespace migrant::coordkv
