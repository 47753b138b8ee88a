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

#include "migrant/simnet/runner.hpp"

#include <algorithm>
#include <random>

namespace migrant::simnet {
namespace {

std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::int64_t to_us(rt::TimePoint t) {
    return std::chrono::duration_cast<std::chrono::microseconds>(t.time_since_epoch()).count();
}

TopicName topic_name(std::size_t k) { return TopicName("topic-" + std::to_string(k)); }

std::string make_payload(std::size_t publisher, std::uint64_t n, std::size_t size) {
    auto p = "p" + std::to_string(publisher) + "-" + std::to_string(n);
    if (p.size() < size) p.append(size - p.size(), '.');
    return p;
}

}  // namespace

const char* outcome_name(Outcome o) noexcept {
    switch (o) {
        case Outcome::Pass: return "pass";
        case Outcome::Fail: return "fail";
        case Outcome::HorizonExceeded: return "horizon-exceeded";
    }
    return "?";
}

std::size_t minimal_failing_prefix(const Assertion& a, std::span<const TraceEvent> trace, const AssertionContext& ctx) {
    // Smallest n with Fail on trace[0, n); the full trace is known to fail.
    std::size_t lo = 0, hi = trace.size();
    while (lo < hi) {
        const auto mid = lo + (hi - lo) / 2;
        auto c = ctx;
        c.caches = nullptr;
        c.now_us = mid == 0 ? 0 : trace[mid - 1].at_us;
        if (a.evaluate(trace.first(mid), c).verdict == Verdict::Fail) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

RunReport run_scenario(const Scenario& sc, std::uint64_t seed, const RunOptions& options) {
    std::uint64_t sm = seed;
    WorldConfig wc;
    wc.seed = splitmix(sm);
    wc.servers = sc.servers;
    wc.link = sc.link;
    wc.engine.num_groups = sc.num_groups;
    wc.engine.cache_depth = sc.cache_depth;
    if (options.configure) options.configure(wc);
    World w(wc);
    std::mt19937_64 rng(splitmix(sm));

    std::vector<std::unique_ptr<Assertion>> assertions;
    for (const auto& name : sc.assertions) assertions.push_back(make_assertion(name));

    std::vector<client::ServerEntry> all;
    for (std::size_t i = 0; i < sc.servers; ++i) all.push_back({World::address(i), 1.0});
    auto client_config = [&](const std::string& name) {
        client::ClientConfig c;
        c.servers = client::ServerList(all);
        c.ping_interval = sc.client_ping;
        c.name = name;
        c.seed = splitmix(sm);
        return c;
    };

    const auto& wl = sc.workload;
    std::vector<std::size_t> publishers;
    for (std::size_t p = 0; p < wl.publishers; ++p) {
        publishers.push_back(w.client_count());
        w.add_client(client_config("pub" + std::to_string(p)));
    }
    for (std::size_t s = 0; s < wl.subscribers; ++s) {
        auto& c = w.add_client(client_config("sub" + std::to_string(s)));
        std::vector<std::size_t> topics(wl.topics);
        for (std::size_t k = 0; k < wl.topics; ++k) topics[k] = k;
        if (wl.topics_per_subscriber > 0) {
            std::shuffle(topics.begin(), topics.end(), rng);
            topics.resize(wl.topics_per_subscriber);
        }
        for (auto k : topics) c.subscribe(topic_name(k));
    }
    for (std::size_t j = 0; j < w.client_count(); ++j) w.client(j).start();

    auto& sched = w.sched();
    const auto t0 = sched.now();

    // Workload: each publisher ticks at 1/rate from a random phase.
    std::uint64_t published = 0;
    if (wl.rate > 0 && wl.topics > 0) {
        const auto interval = std::chrono::duration_cast<rt::Duration>(std::chrono::duration<double>(1.0 / wl.rate));
        for (std::size_t p = 0; p < publishers.size(); ++p) {
            const auto phase = rt::Duration(std::uniform_int_distribution<std::int64_t>(0, interval.count())(rng));
            auto seq = std::make_shared<std::uint64_t>(0);
            auto tick = std::make_shared<std::function<void()>>();
            *tick = [&, p, seq, tick, interval] {
                if (sched.now() - t0 >= wl.stop) return;
                const auto k = std::uniform_int_distribution<std::size_t>(0, wl.topics - 1)(rng);
                w.publish(publishers[p], topic_name(k), make_payload(p, (*seq)++, wl.payload), wl.ack);
                ++published;
                sched.schedule_after(interval, [tick] { (*tick)(); });
            };
            sched.schedule_at(t0 + wl.start + phase, [tick] { (*tick)(); });
        }
    }

    // Fault script.
    std::vector<std::size_t> crashed;
    rt::Duration last_fault{};
    for (const auto& f : sc.faults) {
        last_fault = std::max(last_fault, f.at);
        sched.schedule_at(t0 + f.at, [&, f] {
            switch (f.kind) {
                case FaultEvent::Kind::Crash: {
                    std::size_t s = static_cast<std::size_t>(f.server);
                    if (f.server == FaultEvent::kAny) {
                        std::vector<std::size_t> live;
                        for (std::size_t i = 0; i < w.server_count(); ++i)
                            if (w.alive(i)) live.push_back(i);
                        if (live.empty()) return;
                        s = live[std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(rng)];
                    }
                    w.crash(s);
                    crashed.push_back(s);
                    break;
                }
                case FaultEvent::Kind::Restart: {
                    std::size_t s = static_cast<std::size_t>(f.server);
                    if (f.server == FaultEvent::kAny) {
                        if (crashed.empty()) return;
                        s = crashed.back();
                    }
                    crashed.erase(std::remove(crashed.begin(), crashed.end(), s), crashed.end());
                    w.restart(s);
                    break;
                }
                case FaultEvent::Kind::Partition: w.partition(f.groups); break;
                case FaultEvent::Kind::Heal: w.heal(); break;
                case FaultEvent::Kind::DropNext: w.drop_next(f.from, f.to, f.count); break;
            }
        });
    }

    AssertionContext ctx;
    ctx.servers = sc.servers;
    ctx.cache_depth = sc.cache_depth;
    ctx.fence_bound = wc.cluster.kv.session_timeout + wc.cluster.t_timeout;
    ctx.fence_grace = wc.cluster.t_timeout;

    std::vector<std::optional<CacheSnapshot>> caches;
    auto snapshot = [&] {
        caches.assign(w.server_count(), std::nullopt);
        for (std::size_t i = 0; i < w.server_count(); ++i)
            if (w.alive(i) && w.server(i).serving()) caches[i] = w.engine(i).cache().key_snapshot();
    };
    std::vector<Check> checks(assertions.size());
    auto evaluate = [&] {
        snapshot();
        ctx.caches = &caches;
        ctx.now_us = to_us(sched.now());
        bool decided = true;
        for (std::size_t a = 0; a < assertions.size(); ++a) {
            checks[a] = assertions[a]->evaluate(w.trace().events(), ctx);
            if (checks[a].verdict != Verdict::Pass) decided = false;
        }
        return decided;
    };
    auto settled = [&] {
        for (auto p : publishers)
            if (w.client(p).pending_publications() > 0) return false;
        return true;
    };

    // Run the workload and the fault script, then drain until decided or the horizon.
    w.run_for(std::max(wl.stop, last_fault));
    const auto horizon = t0 + sc.horizon;
    bool failed = false;
    while (true) {
        const bool done = evaluate();
        for (const auto& c : checks) failed |= c.verdict == Verdict::Fail;
        if (failed || (done && settled()) || sched.now() >= horizon) break;
        sched.run_until(std::min(horizon, sched.now() + options.check_interval));
    }

    RunReport r;
    r.scenario = sc.name;
    r.seed = seed;
    r.trace_hash = w.trace().hash();
    r.events = w.trace().size();
    r.end_us = to_us(sched.now());
    r.published = published;
    for (const auto& e : w.trace().events()) {
        r.acked += e.type == Ev::Acked;
        r.failed += e.type == Ev::Failed;
        r.delivered += e.type == Ev::Deliver;
    }
    if (options.keep_trace) r.trace = w.trace().events();
    r.outcome = Outcome::Pass;
    const auto events = std::span<const TraceEvent>(w.trace().events());
    for (std::size_t a = 0; a < assertions.size(); ++a) {
        AssertionReport ar{assertions[a]->name(), checks[a].verdict, checks[a].detail, 0};
        if (ar.verdict == Verdict::Fail) {
            ar.prefix = minimal_failing_prefix(*assertions[a], events, ctx);
            if (r.outcome != Outcome::Fail && options.keep_prefix)
                r.minimal_prefix.assign(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(ar.prefix));
            r.outcome = Outcome::Fail;
        } else if (ar.verdict == Verdict::Undecided && r.outcome == Outcome::Pass) {
            r.outcome = Outcome::HorizonExceeded;
        }
        r.assertions.push_back(std::move(ar));
    }
    return r;
}

}  // namespace migrant::simnet
