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

#include "migrant/bench/audit.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace migrant::bench {

void write_publish_log(const std::string& path, const std::vector<PublishRecord>& records) {
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        char buf[128];
        for (const auto& r : records) {
            std::snprintf(buf, sizeof buf, " %016" PRIx64 " %016" PRIx64 " %" PRId64 " %d\n", r.id.hi, r.id.lo,
                          r.sent_ns, r.acked ? 1 : 0);
            out << r.topic << buf;
        }
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename to " + path);
}

std::vector<PublishRecord> read_publish_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<PublishRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        std::istringstream ss(line);
        PublishRecord r;
        std::string hi, lo;
        int acked = 0;
        if (!(ss >> r.topic >> hi >> lo >> r.sent_ns >> acked))
            throw std::runtime_error(path + ":" + std::to_string(n) + ": malformed record");
        r.id = MsgId{std::stoull(hi, nullptr, 16), std::stoull(lo, nullptr, 16)};
        r.acked = acked != 0;
        out.push_back(std::move(r));
    }
    return out;
}

AuditResult audit(const std::vector<PublishRecord>& pubs, const std::vector<SubscriberLog>& subs,
                  std::int64_t cutoff_ns) {
    AuditResult r;
    std::unordered_map<std::string, std::vector<const PublishRecord*>> by_topic;
    for (const auto& p : pubs)
        if (p.acked && p.sent_ns <= cutoff_ns) by_topic[p.topic].push_back(&p);

    std::map<std::pair<std::string, OrderKey>, MsgId> id_at;

    for (const auto& s : subs) {
        ++r.subscribers;
        std::unordered_set<MsgId> seen;
        OrderKey last = OrderKey::none();
        for (const auto& d : s.deliveries) {
            if (!seen.insert(d.id).second) ++r.duplicates;
            if (d.key <= last) ++r.out_of_order;
            last = std::max(last, d.key);
            auto [it, fresh] = id_at.emplace(std::make_pair(s.topic, d.key), d.id);
            if (!fresh && it->second != d.id) ++r.inconsistent;
        }
        if (!s.subscribed_ns) continue;
        auto it = by_topic.find(s.topic);
        if (it == by_topic.end()) continue;
        for (const auto* p : it->second) {
            if (p->sent_ns < *s.subscribed_ns) continue;
            ++r.expected;
            if (!seen.count(p->id)) ++r.missing;
        }
    }
    return r;
}

}  // namespace migrant::bench
