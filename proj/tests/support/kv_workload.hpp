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
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "kv_cluster.hpp"
#include "linearizability.hpp"

namespace migrant::testing {

/// Sequential reference for create_ephemeral / delete / cas_counter / expire_session.
/// Sessions are live until expired.
struct KvOracle {
    std::map<std::string, coordkv::SessionId> ephemeral;
    std::map<std::string, std::uint64_t> counters;
    std::set<coordkv::SessionId> expired;

    std::string key() const {
        std::ostringstream os;
        for (const auto& [k, s] : ephemeral) os << k << '=' << s.owner << ':' << s.nonce << ';';
        os << '#';
        for (const auto& [k, v] : counters) os << k << '=' << v << ';';
        os << '#';
        for (const auto& s : expired) os << s.owner << ':' << s.nonce << ';';
        return os.str();
    }
};

struct KvOp {
    enum Kind { Create, Delete, Cas, Expire } kind = Create;
    std::string key;
    coordkv::SessionId session;
    std::uint64_t expected = 0;
    std::uint64_t desired = 0;
};

inline coordkv::Result oracle_apply(KvOracle& m, const KvOp& op) {
    using coordkv::Status;
    switch (op.kind) {
        case KvOp::Create:
            if (m.expired.count(op.session)) return {Status::SessionExpired, 0};
            if (m.ephemeral.count(op.key) || m.counters.count(op.key)) return {Status::AlreadyExists, 0};
            m.ephemeral[op.key] = op.session;
            return {Status::Created, 0};
        case KvOp::Delete: {
            auto it = m.ephemeral.find(op.key);
            if (it == m.ephemeral.end()) return {Status::Absent, 0};
            if (it->second != op.session) return {Status::NotOwner, 0};
            m.ephemeral.erase(it);
            return {Status::Ok, 0};
        }
        case KvOp::Cas: {
            if (m.ephemeral.count(op.key)) return {Status::Conflict, 0};
            auto cur = m.counters.count(op.key) ? m.counters[op.key] : 0;
            if (cur != op.expected) return {Status::Conflict, cur};
            m.counters[op.key] = op.desired;
            return {Status::Ok, op.desired};
        }
        case KvOp::Expire: {
            if (m.expired.count(op.session)) return {Status::Absent, 0};
            m.expired.insert(op.session);
            for (auto it = m.ephemeral.begin(); it != m.ephemeral.end();) {
                if (it->second == op.session)
                    it = m.ephemeral.erase(it);
                else
                    ++it;
            }
            return {Status::Ok, 0};
        }
    }
    return {};
}

struct KvRunReport {
    bool linearizable = false;
    bool monotonic_reads = true;
    bool unique_ownership = true;
    std::size_t completed = 0;
    std::size_t pending = 0;
    std::string fault;
};

/// Random create/delete/cas/expire traffic from three replicas with one seeded
/// fault (none, crash+restart, or isolation of one replica), checked against KvOracle.
inline KvRunReport run_kv_linearizability(std::uint64_t seed) {
    using namespace std::chrono_literals;
    coordkv::NodeConfig base;
    base.session_timeout = std::chrono::hours(1);
    KvCluster c(3, seed, base);
    KvRunReport report;
    std::mt19937_64 rng(seed);
    auto& sched = c.sched();
    c.run_until([&] { return c.all_sessions_live(); }, 20s);

    using H = HistoryOp<KvOp, coordkv::Result>;
    auto history = std::make_shared<std::vector<H>>();
    auto clock = std::make_shared<std::uint64_t>(0);
    std::vector<coordkv::SessionId> dead_sessions;
    std::vector<std::uint64_t> last_read(3, 0);
    std::vector<std::uint64_t> incarnation(3, 0);
    const std::vector<std::string> eph_keys{"coord/1", "coord/2"};

    const int fault = static_cast<int>(rng() % 3);
    const std::size_t victim = rng() % 3;
    const auto fault_at = sched.now() + rt::Duration(std::chrono::milliseconds(1000 + rng() % 3000));
    const auto fault_len = std::chrono::milliseconds(1500 + rng() % 1500);
    report.fault = fault == 0 ? "none" : fault == 1 ? "crash" : "isolate";
    if (fault == 1) {
        sched.schedule_at(fault_at, [&, victim] {
            if (auto s = c.node(victim).session()) dead_sessions.push_back(*s);
            c.crash(victim);
        });
        sched.schedule_at(fault_at + fault_len, [&, victim] {
            c.restart(victim);
            last_read[victim] = 0;
            ++incarnation[victim];
        });
    } else if (fault == 2) {
        sched.schedule_at(fault_at, [&, victim] {
            std::set<simnet::NodeId> alone{static_cast<simnet::NodeId>(victim)}, rest;
            for (simnet::NodeId i = 0; i < 3; ++i)
                if (i != victim) rest.insert(i);
            c.net().partition({alone, rest});
        });
        sched.schedule_at(fault_at + fault_len, [&] { c.net().heal(); });
    }

    const auto workload_end = sched.now() + 8s;
    for (auto t = sched.now(); t < workload_end; t += std::chrono::milliseconds(10 + rng() % 60)) {
        const std::size_t who = rng() % 3;
        const auto pick = rng();
        sched.schedule_at(t, [&, who, pick, history, clock] {
            if (!c.alive(who)) return;
            auto& n = c.node(who);
            if (n.session_state() != coordkv::SessionState::Live) return;
            auto e = n.get("epoch/1");
            const std::uint64_t seen = e ? coordkv::parse_counter(e->value) : 0;
            if (seen < last_read[who]) report.monotonic_reads = false;
            last_read[who] = seen;

            KvOp op;
            switch (pick % 7) {
                case 0:
                case 1:
                case 2:
                    op.kind = KvOp::Create;
                    op.key = eph_keys[(pick >> 8) % eph_keys.size()];
                    op.session = *n.session();
                    break;
                case 3:
                    op.kind = KvOp::Delete;
                    op.key = eph_keys[(pick >> 8) % eph_keys.size()];
                    op.session = *n.session();
                    break;
                case 4:
                case 5:
                    op.kind = KvOp::Cas;
                    op.key = "epoch/1";
                    op.expected = seen;
                    op.desired = seen + 1;
                    break;
                default:
                    if (dead_sessions.empty()) return;
                    op.kind = KvOp::Expire;
                    op.session = dead_sessions[(pick >> 8) % dead_sessions.size()];
                    break;
            }
            const std::size_t idx = history->size();
            history->push_back(H{++*clock, std::nullopt, op, {}});
            auto done = [history, clock, idx](coordkv::Result r) {
                (*history)[idx].ret = ++*clock;
                (*history)[idx].res = r;
            };
            switch (op.kind) {
                case KvOp::Create: n.create_ephemeral(op.key, "v", op.session, done); break;
                case KvOp::Delete: n.delete_ephemeral(op.key, done); break;
                case KvOp::Cas: n.cas_counter(op.key, op.expected, op.desired, done); break;
                case KvOp::Expire: n.expire_session(op.session, done); break;
            }
        });
    }

    const auto end = workload_end + 15s;
    while (!sched.empty() && sched.next_time() <= end) {
        sched.step();
        for (const auto& key : eph_keys) {
            int owners = 0;
            for (std::size_t i = 0; i < 3; ++i)
                if (c.alive(i) && c.node(i).owns(key)) ++owners;
            if (owners > 1) report.unique_ownership = false;
        }
    }

    for (const auto& h : *history) (h.ret ? report.completed : report.pending)++;
    LinearizabilityChecker<KvOracle, KvOp, coordkv::Result> checker(
        [](KvOracle& m, const KvOp& op, const coordkv::Result* res) {
            auto r = oracle_apply(m, op);
            return res == nullptr || r == *res;
        },
        [](const KvOracle& m) { return m.key(); });
    report.linearizable = checker.check(*history, KvOracle{});
    return report;
}

}  // namespace migrant::testing
