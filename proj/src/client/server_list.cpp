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

#include "migrant/client/server_list.hpp"

#include <cmath>
#include <sstream>

namespace migrant::client {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

ServerList::ServerList(std::vector<ServerEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw InvalidArgument("server list is empty");
    for (const auto& e : entries_) {
        if (e.address.empty()) throw InvalidArgument("empty server address");
        if (!(e.weight > 0) || !std::isfinite(e.weight)) throw InvalidArgument("server weight must be positive");
    }
}

ServerList ServerList::parse(const std::string& text) {
    std::vector<ServerEntry> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        ServerEntry e;
        auto eq = item.find('=');
        e.address = trim(item.substr(0, eq));
        if (eq != std::string::npos) {
            try {
                std::size_t used = 0;
                const auto w = trim(item.substr(eq + 1));
                e.weight = std::stod(w, &used);
                if (used != w.size()) throw InvalidArgument("bad weight");
            } catch (const std::logic_error&) {
                throw InvalidArgument("bad server weight in '" + item + "'");
            }
        }
        out.push_back(std::move(e));
    }
    return ServerList(std::move(out));
}

void Blacklist::add(const std::string& address, rt::TimePoint until) {
    auto& u = until_[address];
    if (until > u) u = until;
}

bool Blacklist::contains(const std::string& address, rt::TimePoint now) const {
    auto it = until_.find(address);
    return it != until_.end() && it->second > now;
}

void Blacklist::purge(rt::TimePoint now) {
    for (auto it = until_.begin(); it != until_.end();) {
        if (it->second <= now) {
            it = until_.erase(it);
        } else {
            ++it;
        }
    }
}

std::optional<rt::TimePoint> Blacklist::earliest_expiry() const {
    std::optional<rt::TimePoint> best;
    for (const auto& [addr, t] : until_)
        if (!best || t < *best) best = t;
    return best;
}

std::string pick_server(const ServerList& list, const Blacklist& blacklist, rt::TimePoint now, std::mt19937_64& rng) {
    double total = 0;
    for (const auto& e : list.entries())
        if (!blacklist.contains(e.address, now)) total += e.weight;
    if (total <= 0) throw AllServersBlacklisted(blacklist.earliest_expiry().value_or(now));
    double x = std::uniform_real_distribution<double>(0.0, total)(rng);
    const ServerEntry* last = nullptr;
    for (const auto& e : list.entries()) {
        if (blacklist.contains(e.address, now)) continue;
        last = &e;
        if (x < e.weight) return e.address;
        x -= e.weight;
    }
    return last->address;
}

}  // namespace migrant::client
