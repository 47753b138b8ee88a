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
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "migrant/core/types.hpp"
#include "migrant/runtime/executor.hpp"

namespace migrant::client {

struct ServerEntry {
    std::string address;
    double weight = 1.0;
};

/// Servers a client may connect to, each with a positive selection weight.
class ServerList {
public:
    explicit ServerList(std::vector<ServerEntry> entries);

    /// Parses "addr[=weight],addr[=weight],...".
    static ServerList parse(const std::string& text);

    const std::vector<ServerEntry>& entries() const noexcept { return entries_; }

private:
    std::vector<ServerEntry> entries_;
};

/// Temporarily excluded servers.
class Blacklist {
public:
    void add(const std::string& address, rt::TimePoint until);
    bool contains(const std::string& address, rt::TimePoint now) const;
    /// Drops expired entries.
    void purge(rt::TimePoint now);
    std::optional<rt::TimePoint> earliest_expiry() const;
    std::size_t size() const noexcept { return until_.size(); }

private:
    std::map<std::string, rt::TimePoint> until_;
};

class AllServersBlacklisted : public std::runtime_error {
public:
    explicit AllServersBlacklisted(rt::TimePoint retry_at)
        : std::runtime_error("every server is blacklisted"), retry_at(retry_at) {}
    rt::TimePoint retry_at;
};

/// Samples an address with probability proportional to weight among entries not blacklisted at `now`.
std::string pick_server(const ServerList& list, const Blacklist& blacklist, rt::TimePoint now, std::mt19937_64& rng);

}  // namespace migrant::client
