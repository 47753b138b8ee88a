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

#include <atomic>
#include <future>
#include <mutex>
#include <thread>

#include "migrant/client/client.hpp"
#include "migrant/net/node.hpp"
#include "migrant/net/tcp_connector.hpp"

namespace migrant::net {
namespace {

using namespace std::chrono_literals;

std::uint16_t free_port() {
    boost::asio::io_context ctx;
    tcp::acceptor a(ctx, tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), 0));
    return a.local_endpoint().port();
}

template <class Pred>
bool wait_for(Pred pred, std::chrono::milliseconds limit) {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
        if (pred()) return true;
        std::this_thread::sleep_for(10ms);
    }
    return pred();
}

/// SDK clients on one event loop; every Client call goes through the loop.
struct Clients {
    EventLoop loop{"clients"};
    rt::SteadyClock clock;
    TcpConnector connector{loop};
    std::vector<std::unique_ptr<client::Client>> clients;
    std::mutex mu;
    std::map<std::size_t, std::vector<Message>> received;

    Clients() { loop.start(); }
    ~Clients() {
        loop.run_sync([&] {
            for (auto& c : clients) c->stop();
            clients.clear();
        });
        loop.stop();
    }

    std::size_t add(const std::string& servers) {
        std::size_t j = 0;
        loop.run_sync([&] {
            client::ClientConfig cfg;
            cfg.servers = client::ServerList::parse(servers);
            cfg.seed = clients.size() + 1;
            cfg.blacklist_time = 1s;
            j = clients.size();
            clients.push_back(std::make_unique<client::Client>(cfg, loop, clock, connector));
            clients.back()->on_message([this, j](const Message& m, bool) {
                std::lock_guard lk(mu);
                received[j].push_back(m);
            });
            clients.back()->start();
        });
        return j;
    }

    bool connected(std::size_t j) {
        bool c = false;
        loop.run_sync([&] { c = clients[j]->status() == client::ClientStatus::Connected; });
        return c;
    }

    void subscribe(std::size_t j, const std::string& topic) {
        loop.run_sync([&] { clients[j]->subscribe(TopicName(topic)); });
    }

    std::shared_ptr<std::atomic<int>> publish(std::size_t j, const std::string& topic, std::string payload) {
        auto acked = std::make_shared<std::atomic<int>>(0);
        loop.run_sync([&] {
            clients[j]->publish(TopicName(topic), std::move(payload), true, [acked](client::PublishResult r, std::uint32_t) {
                acked->store(r == client::PublishResult::Acked ? 1 : -1);
            });
        });
        return acked;
    }

    std::size_t count(std::size_t j) {
        std::lock_guard lk(mu);
        return received[j].size();
    }
};

TEST(EventLoop, PostRunsInOrder) {
    EventLoop loop;
    loop.start();
    std::vector<int> seen;
    for (int i = 0; i < 100; ++i) loop.post([&, i] { seen.push_back(i); });
    loop.run_sync([] {});
    ASSERT_EQ(seen.size(), 100u);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(seen[i], i);
}

TEST(EventLoop, PostAfterWaits) {
    EventLoop loop;
    loop.start();
    std::promise<std::chrono::steady_clock::time_point> fired;
    const auto t0 = std::chrono::steady_clock::now();
    loop.post_after(50ms, [&] { fired.set_value(std::chrono::steady_clock::now()); });
    EXPECT_GE(fired.get_future().get() - t0, 50ms);
}

TEST(HostPort, Parses) {
    EXPECT_EQ(parse_host_port("127.0.0.1:7400").port, 7400);
    EXPECT_EQ(parse_host_port(":80").host, "0.0.0.0");
    EXPECT_THROW(parse_host_port("nohost"), InvalidArgument);
    EXPECT_THROW(parse_host_port("h:99999"), InvalidArgument);
    EXPECT_THROW(parse_host_port("h:7x"), InvalidArgument);
}

TEST(NodeConfig, ReadsKeys) {
    KeyValueConfig kv(
        "server_id = 1\n"
        "listen_address = 127.0.0.1:7401\n"
        "peers = 0@127.0.0.1:7500, 1@127.0.0.1:7501, 2@127.0.0.1:7502\n"
        "io_threads = 2\nworkers = 3\ncache_depth = 50\n"
        "batch_max_delay_ms = 5\nconflation_window_ms = 20\nmax_outbound_bytes = 1024\n");
    auto c = NodeConfig::from(kv);
    EXPECT_EQ(c.engine.server_id, 1u);
    EXPECT_EQ(c.members.size(), 3u);
    EXPECT_EQ(c.members[2].address, "127.0.0.1:7502");
    EXPECT_EQ(c.engine.io_threads, 2u);
    EXPECT_EQ(c.engine.workers, 3u);
    EXPECT_EQ(c.engine.cache_depth, 50u);
    EXPECT_EQ(c.engine.batch.max_delay, 5ms);
    EXPECT_EQ(c.engine.conflation.window, 20ms);
    EXPECT_EQ(c.engine.max_outbound_bytes, 1024u);
}

TEST(NodeConfig, RejectsBadInput) {
    EXPECT_THROW(NodeConfig::from(KeyValueConfig("colour = blue\n")), ConfigError);
    EXPECT_THROW(NodeConfig::from(KeyValueConfig("peers = 0@a:1, 1@b:2\n")), ConfigError);
    EXPECT_THROW(NodeConfig::from(KeyValueConfig("server_id = 5\npeers = 0@a:1,1@b:2,2@c:3\n")), ConfigError);
    EXPECT_THROW(NodeConfig::from(KeyValueConfig("peers = x@a:1\n")), ConfigError);
    EXPECT_THROW(NodeConfig::from(KeyValueConfig("io_threads = 0\n")), ConfigError);
}

TEST(ServerNode, SingleServerPubSubOverTcp) {
    NodeConfig cfg;
    cfg.listen_address = "127.0.0.1:0";
    cfg.engine.io_threads = 2;
    ServerNode node(cfg);
    node.start();
    const auto addr = "127.0.0.1:" + std::to_string(node.client_port());

    Clients cl;
    const auto sub = cl.add(addr);
    const auto pub = cl.add(addr);
    ASSERT_TRUE(wait_for([&] { return cl.connected(sub) && cl.connected(pub); }, 5s));
    cl.subscribe(sub, "news");
    ASSERT_TRUE(wait_for([&] { return node.engine().worker_shard(0).subscriber_count(TopicName("news")) == 1; }, 5s));

    std::vector<std::shared_ptr<std::atomic<int>>> acks;
    for (int i = 0; i < 50; ++i) acks.push_back(cl.publish(pub, "news", "m" + std::to_string(i)));
    ASSERT_TRUE(wait_for([&] { return cl.count(sub) == 50; }, 5s));
    for (auto& a : acks) EXPECT_TRUE(wait_for([&] { return a->load() == 1; }, 5s));
    std::lock_guard lk(cl.mu);
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(cl.received[sub][i].payload, "m" + std::to_string(i));
        EXPECT_EQ(cl.received[sub][i].key, (OrderKey{1, static_cast<std::uint64_t>(i + 1)}));
    }
    EXPECT_EQ(node.stats().connections, 2u);
}

TEST(ServerNode, ThreeServerClusterReplicatesOverTcp) {
    std::vector<PeerAddress> members;
    std::vector<std::uint16_t> client_ports;
    for (std::uint32_t i = 0; i < 3; ++i) {
        members.push_back({ServerId{i}, "127.0.0.1:" + std::to_string(free_port())});
        client_ports.push_back(free_port());
    }
    std::vector<std::unique_ptr<ServerNode>> nodes;
    for (std::uint32_t i = 0; i < 3; ++i) {
        NodeConfig cfg;
        cfg.engine.server_id = i;
        cfg.cluster.self = ServerId{i};
        cfg.members = members;
        cfg.listen_address = "127.0.0.1:" + std::to_string(client_ports[i]);
        cfg.peer_address = members[i].address;
        cfg.engine.num_groups = 8;
        nodes.push_back(std::make_unique<ServerNode>(cfg));
    }
    for (auto& n : nodes) n->start();

    Clients cl;
    const auto pub = cl.add("127.0.0.1:" + std::to_string(client_ports[0]));
    std::vector<std::size_t> subs;
    for (int i = 1; i < 3; ++i) subs.push_back(cl.add("127.0.0.1:" + std::to_string(client_ports[i])));
    ASSERT_TRUE(wait_for([&] { return cl.connected(pub) && cl.connected(subs[0]) && cl.connected(subs[1]); }, 15s));
    for (auto s : subs) cl.subscribe(s, "t");
    std::this_thread::sleep_for(200ms);

    std::vector<std::shared_ptr<std::atomic<int>>> acks;
    for (int i = 0; i < 20; ++i) acks.push_back(cl.publish(pub, "t", "v" + std::to_string(i)));
    for (auto& a : acks) EXPECT_TRUE(wait_for([&] { return a->load() == 1; }, 20s));
    for (auto s : subs) {
        ASSERT_TRUE(wait_for([&] { return cl.count(s) == 20; }, 10s)) << "subscriber " << s << " got " << cl.count(s);
        std::lock_guard lk(cl.mu);
        for (std::size_t i = 1; i < 20; ++i) EXPECT_LT(cl.received[s][i - 1].key, cl.received[s][i].key);
        EXPECT_EQ(cl.received[s][0].payload, "v0");
    }
    for (auto& n : nodes) n->stop();
}

}  // namespace
}  // namespace migrant::net
