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

#include "migrant/bench/runner.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "migrant/bench/cpu.hpp"
#include "migrant/bench/payload.hpp"
#include "migrant/client/client.hpp"
#include "migrant/net/event_loop.hpp"
#include "migrant/net/tcp_connector.hpp"

namespace migrant::bench {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

template <class Pred>
bool wait_until(Clock::time_point deadline, const std::atomic<bool>* stop, Pred pred) {
    while (Clock::now() < deadline) {
        if (pred()) return true;
        if (stop && stop->load()) return false;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return pred();
}

void sleep_until(Clock::time_point t, const std::atomic<bool>* stop) {
    wait_until(t, stop, [] { return false; });
}

client::ClientConfig client_config(const std::string& servers, std::uint64_t seed, std::string name) {
    client::ClientConfig cfg;
    cfg.servers = client::ServerList::parse(servers);
    cfg.seed = seed;
    cfg.name = std::move(name);
    return cfg;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string topic_name(const std::string& prefix, std::uint32_t index) { return prefix + std::to_string(index); }

// ---------------------------------------------------------------------------- benchpub

PubReport run_benchpub(const PubOptions& opt, const std::atomic<bool>* stop) {
    if (opt.topics == 0 || opt.rate <= 0) throw InvalidArgument("topics and rate must be positive");
    if (opt.connections == 0) throw InvalidArgument("connections must be positive");
    if (opt.payload < kTimestampBytes || opt.payload > Message::kMaxPayload)
        throw InvalidArgument("payload must be between 8 and 65535 bytes");

    PubReport report;
    net::EventLoop loop("benchpub");
    loop.start();
    rt::SteadyClock clock;
    net::TcpConnector connector(loop);
    std::vector<std::unique_ptr<client::Client>> clients;
    std::vector<bool> up(opt.connections, false);
    std::atomic<std::uint32_t> connected{0};
    std::vector<std::int8_t> outcome;  // 0 pending, 1 acked, -1 failed
    std::mt19937_64 rng(opt.seed);
    bool publishing = true;

    loop.run_sync([&] {
        for (std::uint32_t i = 0; i < opt.connections; ++i) {
            clients.push_back(std::make_unique<client::Client>(client_config(opt.servers, opt.seed + i, "benchpub"),
                                                               loop, clock, connector));
            clients.back()->on_status([&, i](client::ClientStatus s, const std::string&) {
                if (s == client::ClientStatus::Connected && !up[i]) {
                    up[i] = true;
                    connected.fetch_add(1);
                }
            });
            clients.back()->start();
        }
    });
    auto stop_all = [&] {
        loop.run_sync([&] {
            for (auto& c : clients) c->stop();
        });
        loop.stop();
    };

    const auto t_start = Clock::now();
    if (!wait_until(t_start + opt.connect_timeout, stop,
                    [&] { return connected.load() == opt.connections; })) {
        report.error = fmt::format("{} of {} connections to {}", connected.load(), opt.connections, opt.servers);
        stop_all();
        return report;
    }
    report.connected = true;
    sleep_until(Clock::now() + opt.warmup, stop);

    const auto interval = std::chrono::duration_cast<rt::Duration>(
        std::chrono::duration<double>(1.0 / (opt.rate * static_cast<double>(opt.topics))));
    const auto t0 = Clock::now();
    const auto t_end = t0 + opt.duration;
    std::uint64_t n = 0;
    std::function<void()> tick = [&] {
        if (!publishing) return;
        const auto now = Clock::now();
        while (publishing && now >= t0 + interval * static_cast<std::int64_t>(n) &&
               t0 + interval * static_cast<std::int64_t>(n) < t_end) {
            const auto index = static_cast<std::uint32_t>(n % opt.topics);
            const auto topic = topic_name(opt.topic_prefix, index);
            auto& c = *clients[index % clients.size()];
            const auto ts = mono_ns();
            const auto idx = report.records.size();
            report.records.push_back(PublishRecord{topic, MsgId{}, ts, false});
            outcome.push_back(0);
            auto done = [&, idx](client::PublishResult r, std::uint32_t) {
                if (idx < outcome.size()) outcome[idx] = r == client::PublishResult::Acked ? 1 : -1;
            };
            report.records[idx].id = c.publish(TopicName(topic), make_payload(opt.payload, ts, rng), opt.ack,
                                               opt.ack ? client::Client::PublishFn(done) : client::Client::PublishFn{});
            ++n;
        }
        const auto next = t0 + interval * static_cast<std::int64_t>(n);
        if (next >= t_end) return;
        loop.post_after(std::max<rt::Duration>(next - Clock::now(), rt::Duration::zero()), [&] { tick(); });
    };
    loop.post([&] { tick(); });
    sleep_until(t_end, stop);
    loop.run_sync([&] { publishing = false; });
    const auto t_last = Clock::now();

    if (opt.ack) {
        wait_until(t_last + opt.drain, nullptr, [&] {
            std::size_t pending = 0;
            loop.run_sync([&] {
                for (auto& c : clients) pending += c->pending_publications();
            });
            return pending == 0;
        });
    }
    loop.run_sync([&] {
        report.published = report.records.size();
        for (std::size_t i = 0; i < outcome.size(); ++i) {
            if (outcome[i] == 1) {
                ++report.acked;
                report.records[i].acked = true;
            } else if (outcome[i] == -1) {
                ++report.failed;
            } else if (opt.ack) {
                ++report.unanswered;
            }
        }
        // Stopping fails what is still pending; keep the counts taken above.
        outcome.clear();
    });
    stop_all();
    report.elapsed_s = std::chrono::duration<double>(t_last - t0).count();
    report.rate_per_s = report.elapsed_s > 0 ? static_cast<double>(report.published) / report.elapsed_s : 0;
    if (!opt.log_path.empty()) write_publish_log(opt.log_path, report.records);
    return report;
}

// ---------------------------------------------------------------------------- benchsub

namespace {

struct SubShard {
    net::EventLoop loop;
    net::TcpConnector connector{loop};
    std::vector<std::unique_ptr<client::Client>> clients;
    std::vector<SubscriberLog> logs;
    std::vector<double> samples;
    std::map<std::uint32_t, std::pair<std::uint64_t, double>> buckets;
    std::uint64_t delivered = 0;
    std::uint64_t recovered = 0;

    explicit SubShard(std::string name) : loop(std::move(name)) {}
};

}  // namespace

SubReport run_benchsub(const SubOptions& opt, const std::atomic<bool>* stop) {
    if (opt.topics == 0 || opt.loops == 0) throw InvalidArgument("topics and loops must be positive");
    SubReport report;
    report.requested = opt.connections;
    rt::SteadyClock clock;
    std::vector<std::unique_ptr<SubShard>> shards;
    for (std::uint32_t i = 0; i < opt.loops; ++i) {
        shards.push_back(std::make_unique<SubShard>("benchsub" + std::to_string(i)));
        shards.back()->loop.start();
    }

    const auto t0 = Clock::now();
    const std::int64_t t0_ns = mono_ns();
    const std::int64_t measure_ns = t0_ns + std::chrono::duration_cast<std::chrono::nanoseconds>(opt.warmup).count();
    const std::int64_t end_ns = measure_ns + std::chrono::duration_cast<std::chrono::nanoseconds>(opt.duration).count();
    const auto t_measure = t0 + opt.warmup;
    const auto t_end = t_measure + opt.duration;

    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::uint32_t> pick(0, opt.topics - 1);
    auto add_client = [&](std::uint32_t j) {
        auto& sh = *shards[j % opt.loops];
        const auto topic = topic_name(opt.topic_prefix, pick(rng));
        sh.loop.post([&sh, &opt, &clock, j, topic, measure_ns, end_ns, t0_ns] {
            const auto local = sh.clients.size();
            auto cfg = client_config(opt.servers, opt.seed * 1000003 + j, "benchsub-" + std::to_string(j));
            sh.clients.push_back(std::make_unique<client::Client>(cfg, sh.loop, clock, sh.connector));
            sh.logs.push_back(SubscriberLog{topic, std::nullopt, {}});
            auto& c = *sh.clients.back();
            c.on_subscribed([&sh, local](const TopicName&, OrderKey) {
                auto& log = sh.logs[local];
                if (!log.subscribed_ns) log.subscribed_ns = mono_ns();
            });
            c.on_message([&sh, local, measure_ns, end_ns, t0_ns](const Message& m, bool recovered) {
                const auto now = mono_ns();
                ++sh.delivered;
                if (recovered) ++sh.recovered;
                sh.logs[local].deliveries.push_back(Delivery{m.publisher_msg_id, m.key});
                const auto ts = read_timestamp(m.payload);
                if (!ts) return;
                const double ms = static_cast<double>(now - *ts) / 1e6;
                auto& b = sh.buckets[static_cast<std::uint32_t>((now - t0_ns) / 1'000'000'000)];
                ++b.first;
                b.second += ms;
                if (now >= measure_ns && now < end_ns) sh.samples.push_back(ms);
            });
            c.start();
            c.subscribe(TopicName(topic));
        });
    };

    // Ramp up connections in 10 ms batches.
    std::uint32_t created = 0;
    while (created < opt.connections && !(stop && stop->load())) {
        const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        const auto due = std::min<std::uint64_t>(opt.connections,
                                                 static_cast<std::uint64_t>(opt.connect_rate * elapsed) + 1);
        while (created < due) add_client(created++);
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }

    auto count_connected = [&] {
        std::uint64_t n = 0;
        for (auto& sh : shards) {
            sh->loop.run_sync([&] {
                for (auto& c : sh->clients) n += c->status() == client::ClientStatus::Connected;
            });
        }
        return n;
    };

    std::map<std::uint32_t, std::uint64_t> connected_at;
    auto sample_until = [&](Clock::time_point until) {
        auto next = Clock::now();
        while (Clock::now() < until && !(stop && stop->load())) {
            const auto sec = static_cast<std::uint32_t>(std::chrono::duration_cast<std::chrono::seconds>(Clock::now() - t0).count());
            connected_at[sec] = count_connected();
            next += std::chrono::seconds(1);
            sleep_until(std::min(next, until), stop);
        }
    };

    sample_until(t_measure);
    report.connected = static_cast<std::uint32_t>(count_connected());
    report.failed = report.requested - report.connected;
    const bool enough = report.requested == 0 ||
                        static_cast<double>(report.connected) >= opt.min_connected_fraction * report.requested;
    if (!enough) {
        report.aborted = true;
        report.error = fmt::format("only {} of {} connections established", report.connected, report.requested);
    }

    std::vector<std::unique_ptr<CpuSampler>> cpus;
    std::optional<std::uint64_t> bytes0;
    if (!report.aborted) {
        for (auto pid : opt.broker_pids) {
            cpus.push_back(std::make_unique<CpuSampler>(pid));
            cpus.back()->start();
        }
        std::uint64_t sum = 0;
        bool all = !opt.broker_stats.empty();
        for (const auto& f : opt.broker_stats) {
            auto b = read_bytes_out(f);
            if (b) sum += *b;
            else all = false;
        }
        if (all) bytes0 = sum;
        sample_until(t_end);
    }
    const auto t_stop = Clock::now();

    if (!cpus.empty()) {
        double total = 0;
        bool any = false;
        for (auto& s : cpus) {
            s->stop();
            const auto m = s->mean_percent();
            report.cpu_per_broker.push_back(m.value_or(0));
            if (m) {
                total += *m;
                any = true;
            }
        }
        if (any) report.cpu_percent = total;
    }
    if (bytes0) {
        std::uint64_t sum = 0;
        bool all = true;
        for (const auto& f : opt.broker_stats) {
            auto b = read_bytes_out(f);
            if (b) sum += *b;
            else all = false;
        }
        const double secs = std::chrono::duration<double>(t_stop - t_measure).count();
        if (all && secs > 0 && sum >= *bytes0) report.gbps = static_cast<double>(sum - *bytes0) * 8 / secs / 1e9;
    }

    std::vector<double> samples;
    std::vector<SubscriberLog> logs;
    std::map<std::uint32_t, std::pair<std::uint64_t, double>> buckets;
    std::uint64_t connects = 0, ever = 0;
    for (auto& sh : shards) {
        sh->loop.run_sync([&] {
            for (auto& c : sh->clients) {
                if (c->status() == client::ClientStatus::Connected) ++report.by_server[c->address()];
                connects += c->diagnostics().connects;
                ever += c->diagnostics().connects > 0;
                c->stop();
            }
            samples.insert(samples.end(), sh->samples.begin(), sh->samples.end());
            for (auto& l : sh->logs) logs.push_back(std::move(l));
            for (auto& [t, b] : sh->buckets) {
                buckets[t].first += b.first;
                buckets[t].second += b.second;
            }
            report.delivered += sh->delivered;
            report.recovered += sh->recovered;
        });
    }
    for (auto& sh : shards) {
        sh->loop.run_sync([&] { sh->clients.clear(); });
        sh->loop.stop();
    }
    report.reconnects = connects - ever;
    report.latency = compute_stats(std::move(samples));
    for (const auto& [t, c] : connected_at) {
        SeriesPoint p;
        p.t = t;
        p.connected = c;
        if (auto it = buckets.find(t); it != buckets.end()) {
            p.count = it->second.first;
            p.mean_ms = it->second.first ? it->second.second / static_cast<double>(it->second.first) : 0;
        }
        report.series.push_back(p);
    }

    if (!opt.audit_path.empty() && !report.aborted) {
        const auto deadline = Clock::now() + opt.audit_wait;
        if (wait_until(deadline, stop, [&] { return std::filesystem::exists(opt.audit_path); })) {
            const auto pubs = read_publish_log(opt.audit_path);
            report.audit =
                audit(pubs, logs, end_ns - std::chrono::duration_cast<std::chrono::nanoseconds>(opt.audit_margin).count());
        } else {
            report.error = "publish log " + opt.audit_path + " did not appear";
        }
    }
    return report;
}

std::optional<std::uint64_t> read_bytes_out(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        auto j = json::parse(in);
        return j.at("bytes_out").get<std::uint64_t>();
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------- reports

std::string to_json(const PubOptions& opt, const PubReport& r) {
    json j;
    j["tool"] = "benchpub";
    j["version"] = 1;
    j["config"] = {{"servers", opt.servers},
                   {"topics", opt.topics},
                   {"rate", opt.rate},
                   {"payload", opt.payload},
                   {"connections", opt.connections},
                   {"duration_s", std::chrono::duration<double>(opt.duration).count()},
                   {"warmup_s", std::chrono::duration<double>(opt.warmup).count()},
                   {"ack", opt.ack}};
    j["connected"] = r.connected;
    j["published"] = r.published;
    j["acked"] = r.acked;
    j["failed"] = r.failed;
    j["unanswered"] = r.unanswered;
    j["elapsed_s"] = r.elapsed_s;
    j["rate_per_s"] = r.rate_per_s;
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    return j.dump(2);
}

std::string to_json(const SubOptions& opt, const SubReport& r) {
    json j;
    j["tool"] = "benchsub";
    j["version"] = 1;
    j["config"] = {{"servers", opt.servers},
                   {"connections", opt.connections},
                   {"topics", opt.topics},
                   {"duration_s", std::chrono::duration<double>(opt.duration).count()},
                   {"warmup_s", std::chrono::duration<double>(opt.warmup).count()},
                   {"loops", opt.loops},
                   {"seed", opt.seed}};
    json by = json::object();
    for (const auto& [a, n] : r.by_server) by[a] = n;
    j["connections"] = {{"requested", r.requested},
                        {"connected", r.connected},
                        {"failed", r.failed},
                        {"reconnects", r.reconnects},
                        {"by_server", by}};
    j["latency_ms"] = {{"count", r.latency.count},       {"median", opt_json(r.latency.median)},
                       {"mean", opt_json(r.latency.mean)}, {"stdev", opt_json(r.latency.stdev)},
                       {"p90", opt_json(r.latency.p90)},   {"p95", opt_json(r.latency.p95)},
                       {"p99", opt_json(r.latency.p99)}};
    j["messages"] = {{"delivered", r.delivered}, {"recovered", r.recovered}};
    j["broker"] = {{"cpu_percent", opt_json(r.cpu_percent)},
                   {"cpu_per_broker", r.cpu_per_broker},
                   {"gbps", opt_json(r.gbps)}};
    json series = json::array();
    for (const auto& p : r.series)
        series.push_back({{"t", p.t}, {"count", p.count}, {"mean_ms", p.mean_ms}, {"connected", p.connected}});
    j["series"] = series;
    if (r.audit) {
        const auto& a = *r.audit;
        j["audit"] = {{"ok", a.ok()},
                      {"subscribers", a.subscribers},
                      {"expected", a.expected},
                      {"missing", a.missing},
                      {"out_of_order", a.out_of_order},
                      {"duplicates", a.duplicates},
                      {"inconsistent", a.inconsistent}};
    } else {
        j["audit"] = nullptr;
    }
    j["aborted"] = r.aborted;
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    return j.dump(2);
}

std::string to_text(const PubReport& r) {
    std::string s = fmt::format("published {} acked {} failed {} unanswered {} in {:.1f}s ({:.1f}/s)\n", r.published,
                                r.acked, r.failed, r.unanswered, r.elapsed_s, r.rate_per_s);
    if (!r.error.empty()) s += "error: " + r.error + "\n";
    return s;
}

std::string to_text(const SubReport& r) {
    auto f = [](const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : std::string("-"); };
    std::string s = fmt::format("connections {}/{} (failed {}, reconnects {})\n", r.connected, r.requested, r.failed,
                                r.reconnects);
    for (const auto& [a, n] : r.by_server) s += fmt::format("  {} {}\n", a, n);
    s += fmt::format("latency ms: n {} median {} mean {} stdev {} p90 {} p95 {} p99 {}\n", r.latency.count,
                     f(r.latency.median), f(r.latency.mean), f(r.latency.stdev), f(r.latency.p90), f(r.latency.p95),
                     f(r.latency.p99));
    s += fmt::format("delivered {} (recovered {})\n", r.delivered, r.recovered);
    s += fmt::format("broker cpu% {} gbps {}\n", f(r.cpu_percent), f(r.gbps));
    if (r.audit) {
        const auto& a = *r.audit;
        s += fmt::format("audit {}: expected {} missing {} out_of_order {} duplicates {} inconsistent {}\n",
                         a.ok() ? "ok" : "FAILED", a.expected, a.missing, a.out_of_order, a.duplicates, a.inconsistent);
    }
    if (!r.error.empty()) s += "error: " + r.error + "\n";
    return s;
}

}  // namespace migrant::bench
