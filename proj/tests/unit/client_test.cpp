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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "migrant/client/dedupe.hpp"
#include "migrant/client/reconnect.hpp"
#include "migrant/client/server_list.hpp"
#include "migrant/simnet/world.hpp"

namespace migrant::client {
namespace {

using namespace std::chrono_literals;
using simnet::Ev;
using simnet::World;

const rt::TimePoint kT0{};

// ------------------------------------------------------------------ server selection

TEST(ServerList, RejectsEmptyAndNonPositiveWeights) {
    EXPECT_THROW(ServerList({}), InvalidArgument);
    EXPECT_THROW(ServerList({{"a", 0.0}}), InvalidArgument);
    EXPECT_THROW(ServerList({{"a", -1.0}}), InvalidArgument);
}

TEST(ServerList, Parse) {
    auto l = ServerList::parse("h1:1=1, h2:2=2.5,h3:3");
    ASSERT_EQ(l.entries().size(), 3u);
    EXPECT_EQ(l.entries()[1].address, "h2:2");
    EXPECT_DOUBLE_EQ(l.entries()[1].weight, 2.5);
    EXPECT_DOUBLE_EQ(l.entries()[2].weight, 1.0);
    EXPECT_THROW(ServerList::parse(""), InvalidArgument);
    EXPECT_THROW(ServerList::parse("a=x"), InvalidArgument);
}

TEST(PickServer, SingleEntryAlwaysChosen) {
    ServerList l({{"only", 3.0}});
    Blacklist b;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(pick_server(l, b, kT0, rng), "only");
}

TEST(PickServer, FrequenciesFollowWeights) {
    ServerList l({{"a", 1}, {"b", 1}, {"c", 2}});
    Blacklist b;
    std::mt19937_64 rng(42);
    std::map<std::string, int> n;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++n[pick_server(l, b, kT0, rng)];
    // Analytic: weight / total weight.
    const double total = 1 + 1 + 2;
    EXPECT_NEAR(n["a"] / double(draws), 1 / total, 0.02);
    EXPECT_NEAR(n["b"] / double(draws), 1 / total, 0.02);
    EXPECT_NEAR(n["c"] / double(draws), 2 / total, 0.02);
}

TEST(PickServer, BlacklistedEntryNeverChosenUntilExpiry) {
    ServerList l({{"a", 1}, {"b", 100}});
    Blacklist b;
    b.add("b", kT0 + 30s);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(pick_server(l, b, kT0 + 29s, rng), "a");
    std::set<std::string> seen;
    for (int i = 0; i < 100; ++i) seen.insert(pick_server(l, b, kT0 + 30s, rng));
    EXPECT_TRUE(seen.count("b"));
}

TEST(PickServer, AllBlacklistedReportsEarliestExpiry) {
    ServerList l({{"a", 1}, {"b", 1}});
    Blacklist b;
    b.add("a", kT0 + 10s);
    b.add("b", kT0 + 5s);
    std::mt19937_64 rng(3);
    try {
        pick_server(l, b, kT0, rng);
        FAIL();
    } catch (const AllServersBlacklisted& e) {
        EXPECT_EQ(e.retry_at, kT0 + 5s);
    }
    b.purge(kT0 + 6s);
    EXPECT_EQ(b.size(), 1u);
    EXPECT_EQ(pick_server(l, b, kT0 + 6s, rng), "b");
}

// ------------------------------------------------------------------ reconnect policy

TEST(Reconnect, BackoffSequence) {
    ReconnectPolicy p;
    p.base = 100ms;
    p.cap = 3200ms;
    const std::vector<int> want{100, 200, 400, 800, 1600, 3200, 3200, 3200};
    for (std::size_t i = 0; i < want.size(); ++i)
        EXPECT_EQ(p.nominal(static_cast<std::uint32_t>(i + 1)), rt::Duration(std::chrono::milliseconds(want[i])));
    EXPECT_EQ(p.nominal(200), 3200ms);
}

TEST(Reconnect, JitterWithinHalfToOneAndHalfNominal) {
    ReconnectPolicy p;
    p.base = 100ms;
    p.cap = 3200ms;
    std::mt19937_64 rng(9);
    rt::Duration lo = rt::Duration::max(), hi = rt::Duration::zero();
    for (int i = 0; i < 10000; ++i) {
        const auto d = p.delay(6, rng);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        ASSERT_GE(d, 1600ms);
        ASSERT_LE(d, 4800ms);
    }
    EXPECT_LT(lo, 1700ms);
    EXPECT_GT(hi, 4700ms);
    p.jitter = false;
    EXPECT_EQ(p.delay(3, rng), 400ms);
}

TEST(Reconnect, RandomWaitUniformInRange) {
    ReconnectPolicy p;
    p.mode = ReconnectPolicy::Mode::RandomWait;
    p.min_wait = 200ms;
    p.max_wait = 600ms;
    std::mt19937_64 rng(5);
    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto d = p.delay(1, rng);
        ASSERT_GE(d, 200ms);
        ASSERT_LE(d, 600ms);
        sum += std::chrono::duration<double, std::milli>(d).count();
    }
    EXPECT_NEAR(sum / 10000, 400, 5);
}

// ------------------------------------------------------------------ dedupe

TEST(Dedupe, SuppressesWithinWindow) {
    DedupeBuffer d(3);
    std::mt19937_64 rng(1);
    std::vector<MsgId> ids;
    for (int i = 0; i < 4; ++i) ids.push_back(MsgId::random(rng));
    EXPECT_FALSE(d.seen(ids[0]));
    EXPECT_TRUE(d.seen(ids[0]));
    EXPECT_FALSE(d.seen(ids[1]));
    EXPECT_FALSE(d.seen(ids[2]));
    EXPECT_EQ(d.size(), 3u);
    EXPECT_FALSE(d.seen(ids[3]));  // evicts ids[0]
    EXPECT_FALSE(d.contains(ids[0]));
    EXPECT_TRUE(d.contains(ids[1]));
    EXPECT_FALSE(d.seen(ids[0]));
}

// ------------------------------------------------------------------ SDK against a simulated cluster

simnet::WorldConfig world_config(std::uint64_t seed) {
    simnet::WorldConfig c;
    c.seed = seed;
    c.engine.num_groups = 16;
    return c;
}

ClientConfig config_for(std::vector<ServerEntry> servers, std::uint64_t seed) {
    ClientConfig c;
    c.servers = ServerList(std::move(servers));
    c.seed = seed;
    return c;
}

std::vector<ServerEntry> all3() { return {{"s0", 1}, {"s1", 1}, {"s2", 1}}; }

std::size_t count(World& w, Ev type) {
    const auto& ev = w.trace().events();
    return static_cast<std::size_t>(std::count_if(ev.begin(), ev.end(), [&](const auto& e) { return e.type == type; }));
}

void await_cluster(World& w) {
    ASSERT_TRUE(w.run_until(
        [&] {
            for (std::size_t j = 0; j < w.client_count(); ++j)
                if (w.client(j).running() && w.client(j).status() != ClientStatus::Connected) return false;
            return true;
        },
        30s));
    // Peers discover each other within a few ping intervals.
    w.run_for(2s);
}

TEST(ClientSdk, AckedAfterOneAttemptWhenHealthy) {
    World w(world_config(2));
    w.add_client(config_for(all3(), 1)).start();
    await_cluster(w);
    w.publish(0, TopicName("a"), "x", true);
    ASSERT_TRUE(w.run_until([&] { return count(w, Ev::Acked) == 1; }, 10s));
    const auto& ev = w.trace().events();
    auto it = std::find_if(ev.begin(), ev.end(), [](const auto& e) { return e.type == Ev::Acked; });
    EXPECT_EQ(it->num, 1u);
    EXPECT_EQ(w.client(0).pending_publications(), 0u);
}

TEST(ClientSdk, NackThenRetryDeliversOnce) {
    World w(world_config(4));
    w.add_client(config_for({{"s0", 1}}, 1));
    auto& sub = w.add_client(config_for({{"s1", 1}}, 2));
    sub.subscribe(TopicName("a"));
    // Connect before the peers see each other: the first attempt is nacked.
    for (std::size_t j = 0; j < 2; ++j) w.client(j).start();
    ASSERT_TRUE(w.run_until([&] { return w.client(0).status() == ClientStatus::Connected; }, 5s));
    w.publish(0, TopicName("a"), "x", true);
    ASSERT_TRUE(w.run_until([&] { return count(w, Ev::Acked) == 1; }, 20s));
    w.run_for(2s);
    EXPECT_GE(w.client(0).diagnostics().nacks, 1u);
    const auto& ev = w.trace().events();
    auto it = std::find_if(ev.begin(), ev.end(), [](const auto& e) { return e.type == Ev::Acked; });
    EXPECT_GE(it->num, 2u);
    EXPECT_EQ(count(w, Ev::Deliver), 1u);
    EXPECT_EQ(sub.diagnostics().delivered, 1u);
}

TEST(ClientSdk, UnackedPublishDuringCrashIsSilent) {
    World w(world_config(6));
    w.add_client(config_for({{"s0", 1}}, 1)).start();
    await_cluster(w);
    w.crash(0);
    w.publish(0, TopicName("a"), "x", false);
    w.run_for(5s);
    EXPECT_EQ(count(w, Ev::Failed), 0u);
    EXPECT_EQ(count(w, Ev::Acked), 0u);
    EXPECT_EQ(w.client(0).pending_publications(), 0u);
}

TEST(ClientSdk, ReconnectMidStreamObservesFullSequence) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        World w(world_config(seed));
        w.add_client(config_for({{"s0", 1}}, seed));
        auto& sub = w.add_client(config_for(all3(), seed + 100));
        sub.subscribe(TopicName("feed"));
        w.client(0).start();
        sub.start();
        await_cluster(w);
        const auto victim = std::stoul(sub.address().substr(1));
        std::set<MsgId> acked;
        // Publishing happens through s0; if the subscriber sits on s0 as well, its
        // connection is forced down by crashing s0 after the publisher is moved.
        int sent = 0;
        auto pump = [&](int n) {
            for (int i = 0; i < n; ++i) w.publish(0, TopicName("feed"), "m" + std::to_string(sent++), true);
        };
        pump(10);
        w.run_for(1s);
        if (victim == 0) {
            w.client(0).stop();
            w.add_client(config_for({{"s1", 1}}, seed + 7)).start();
            await_cluster(w);
        }
        const std::size_t pub = victim == 0 ? 2 : 0;
        w.crash(victim);
        for (int i = 0; i < 10; ++i) {
            w.publish(pub, TopicName("feed"), "m" + std::to_string(sent++), true);
            w.run_for(200ms);
        }
        ASSERT_TRUE(w.run_until([&] { return count(w, Ev::Acked) == 20; }, 60s)) << "seed " << seed;
        for (const auto& e : w.trace().events())
            if (e.type == Ev::Acked) acked.insert(e.id);
        ASSERT_TRUE(w.run_until([&] { return sub.diagnostics().delivered >= 20; }, 60s)) << "seed " << seed;
        w.run_for(2s);
        std::vector<OrderKey> keys;
        std::set<MsgId> got;
        for (const auto& e : w.trace().events()) {
            if (e.type != Ev::Deliver || e.node != 1) continue;
            keys.push_back(e.key);
            EXPECT_TRUE(got.insert(e.id).second) << "duplicate, seed " << seed;
        }
        EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end())) << "seed " << seed;
        EXPECT_EQ(got, acked) << "seed " << seed;
        EXPECT_GE(sub.diagnostics().connects, 2u);
    }
}

TEST(ClientSdk, HerdReconnectsAreSpread) {
    World w(world_config(8));
    const std::size_t n = 1000;
    // Heavily biased towards s0 so that nearly every client starts there.
    for (std::size_t j = 0; j < n; ++j) w.add_client(config_for({{"s0", 1e6}, {"s1", 1}, {"s2", 1}}, j + 1)).start();
    await_cluster(w);
    std::size_t on0 = 0;
    for (std::size_t j = 0; j < n; ++j) on0 += w.client(j).address() == "s0";
    ASSERT_GE(on0, 990u);
    const auto crash_at = w.now_us();
    w.crash(0);
    ASSERT_TRUE(w.run_until(
        [&] {
            for (std::size_t j = 0; j < n; ++j)
                if (w.client(j).status() != ClientStatus::Connected || w.client(j).address() == "s0") return false;
            return true;
        },
        60s));
    std::map<std::int64_t, int> buckets;
    for (const auto& e : w.trace().events())
        if (e.type == Ev::Connected && e.at_us > crash_at) ++buckets[(e.at_us - crash_at) / 100000];
    int worst = 0, total = 0;
    for (auto [b, k] : buckets) {
        worst = std::max(worst, k);
        total += k;
    }
    EXPECT_GE(total, static_cast<int>(on0));
    EXPECT_LT(worst, 300);
}

}  // namespace
}  // namespace migrant::client
