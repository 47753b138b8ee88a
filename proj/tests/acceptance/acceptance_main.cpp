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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/asio.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "../support/frame_gen.hpp"
#include "../support/kv_workload.hpp"
#include "migrant/simnet/runner.hpp"
#include "migrant/wire/codec.hpp"
#include "process.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace migrant::acceptance {
namespace {

// Pinned tolerances.
constexpr int kSeeds = 100;
constexpr double kSuiteWallLimitS = 60.0;
constexpr double kMaxMeanLatencyMs = 100.0;
constexpr double kMaxP99LatencyMs = 700.0;
constexpr double kMinSampleFraction = 0.95;  // of connections * duration notifications
constexpr double kCpuBlowupFactor = 3.0;
constexpr double kBalanceTolerance = 0.10;
constexpr double kLatencyGrowthLimit = 2.0;

struct Result {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    const char* name;
    std::function<Result()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------- simulation suites

struct SuiteResult {
    std::string scenario;
    double wall_s = 0;
    std::vector<simnet::RunReport> runs;

    /// Seeds on which `assertion` did not pass.
    std::vector<std::uint64_t> failing(const std::string& assertion) const {
        std::vector<std::uint64_t> out;
        for (const auto& r : runs) {
            bool ok = false;
            for (const auto& a : r.assertions)
                if (a.name == assertion) ok = a.verdict == simnet::Verdict::Pass;
            if (!ok) out.push_back(r.seed);
        }
        return out;
    }
    std::vector<std::uint64_t> not_passed() const {
        std::vector<std::uint64_t> out;
        for (const auto& r : runs)
            if (r.outcome != simnet::Outcome::Pass) out.push_back(r.seed);
        return out;
    }
};

std::map<std::string, SuiteResult> g_suites;

const SuiteResult& suite(const std::string& name) {
    auto it = g_suites.find(name);
    if (it != g_suites.end()) return it->second;
    SuiteResult s;
    s.scenario = name;
    const auto sc = simnet::load_scenario(std::string(MIGRANT_SCENARIO_DIR) + "/" + name + ".scn");
    simnet::RunOptions opt;
    opt.keep_prefix = false;
    const auto t0 = std::chrono::steady_clock::now();
    for (int seed = 1; seed <= kSeeds; ++seed) s.runs.push_back(simnet::run_scenario(sc, seed, opt));
    s.wall_s = seconds_since(t0);
    return g_suites.emplace(name, std::move(s)).first->second;
}

std::string seeds_text(const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < seeds.size() && i < 10; ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
    if (seeds.size() > 10) s += ",...";
    return s;
}

Result suite_result(const SuiteResult& s, const std::vector<std::string>& assertions) {
    Result r;
    r.pass = s.wall_s < kSuiteWallLimitS && s.not_passed().empty();
    r.detail = fmt::format("{} seeds of {}.scn in {:.1f}s", s.runs.size(), s.scenario, s.wall_s);
    for (const auto& a : assertions) {
        const auto bad = s.failing(a);
        r.pass = r.pass && bad.empty();
        r.detail += fmt::format("; {} violations on seeds {}", a, seeds_text(bad));
    }
    if (!s.not_passed().empty()) r.detail += "; runs not passing: " + seeds_text(s.not_passed());
    return r;
}

Result total_order() { return suite_result(suite("total_order"), {"total_order"}); }

Result at_least_once_under_crash() {
    const auto& s = suite("crash_failover");
    auto r = suite_result(s, {"at_least_once"});
    std::uint64_t acked = 0;
    for (const auto& run : s.runs) acked += run.acked;
    r.detail += fmt::format("; {} acked publications checked", acked);
    return r;
}

Result coordinator_uniqueness() {
    return suite_result(suite("election_race"), {"coordinator_uniqueness", "epoch_monotonic"});
}

Result two_copy_rule() {
    Result r{true, ""};
    std::uint64_t acks = 0;
    for (const auto* name : {"total_order", "crash_failover", "election_race", "partition"}) {
        const auto& s = suite(name);
        const auto bad = s.failing("two_copy");
        r.pass = r.pass && bad.empty();
        for (const auto& run : s.runs) acks += run.acked;
        r.detail += fmt::format("{}{}: violations on seeds {}", r.detail.empty() ? "" : "; ", name, seeds_text(bad));
    }
    r.detail += fmt::format("; {} PUBACKs checked", acks);
    return r;
}

Result partition_fencing() { return suite_result(suite("partition"), {"fencing", "cache_equality"}); }

// ---------------------------------------------------------------------------- coordkv

Result kv_linearizability() {
    Result r{true, ""};
    std::vector<std::uint64_t> bad;
    std::size_t ops = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const auto rep = testing::run_kv_linearizability(static_cast<std::uint64_t>(seed));
        ops += rep.completed;
        if (!rep.linearizable || !rep.monotonic_reads || !rep.unique_ownership) bad.push_back(seed);
    }
    r.pass = bad.empty();
    r.detail = fmt::format("{} schedules, {} completed operations in {:.1f}s; violations on seeds {}", kSeeds, ops,
                           seconds_since(t0), seeds_text(bad));
    return r;
}

// ---------------------------------------------------------------------------- wire

Result chunking_invariance() {
    testing::FrameGen gen(7);
    std::size_t frames = 0, splits = 0, failures = 0;
    for (int k = wire::kMinKind; k <= wire::kMaxKind; ++k) {
        for (int sample = 0; sample < 8; ++sample) {
            const auto f = gen.make(static_cast<wire::Kind>(k));
            const auto bytes = wire::encode_frame(f);
            ++frames;
            // Every single split point, and every pair of split points for short frames.
            for (std::size_t i = 0; i <= bytes.size(); ++i) {
                const std::size_t j_first = bytes.size() <= 96 ? i : bytes.size();
                for (std::size_t j = j_first; j <= bytes.size(); ++j) {
                    ++splits;
                    wire::DecodeBuffer d;
                    std::vector<wire::Frame> out;
                    const std::span<const std::uint8_t> all(bytes);
                    for (auto part : {all.subspan(0, i), all.subspan(i, j - i), all.subspan(j)}) {
                        auto got = d.decode_frames(part);
                        out.insert(out.end(), got.begin(), got.end());
                    }
                    if (out.size() != 1 || !(out[0] == f) || d.pending_bytes() != 0) ++failures;
                }
            }
        }
    }
    return {failures == 0, fmt::format("{} frames over {} kinds, {} split layouts, {} mismatches", frames,
                                       wire::kMaxKind - wire::kMinKind + 1, splits, failures)};
}

// ---------------------------------------------------------------------------- real sockets

std::uint16_t free_port() {
    boost::asio::io_context ctx;
    boost::asio::ip::tcp::acceptor a(ctx, {boost::asio::ip::make_address("127.0.0.1"), 0});
    return a.local_endpoint().port();
}

struct Workdir {
    fs::path dir;
    Workdir() {
        dir = fs::temp_directory_path() / fmt::format("migrant-acceptance-{}", ::getpid());
        fs::create_directories(dir);
    }
    ~Workdir() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::unique_ptr<Workdir> g_work;

struct Broker {
    std::string address;
    std::string stats;
    std::unique_ptr<Process> proc;
};

Broker start_broker(const std::string& tag, std::uint32_t id, std::uint16_t port, const std::string& peers,
                    const std::string& peer_address) {
    Broker b;
    b.address = "127.0.0.1:" + std::to_string(port);
    b.stats = g_work->path(tag + ".stats");
    const auto conf = g_work->path(tag + ".conf");
    std::ofstream(conf) << fmt::format(
        "server_id = {}\nlisten_address = {}\nstats_file = {}\nlog_level = warn\n{}{}", id, b.address, b.stats,
        peers.empty() ? "" : "peers = " + peers + "\n",
        peer_address.empty() ? "" : "peer_address = " + peer_address + "\n");
    b.proc = std::make_unique<Process>(std::vector<std::string>{MIGRANTD_PATH, conf}, g_work->path(tag + ".out"));
    if (!b.proc->wait_for_output("ready", 10s)) throw std::runtime_error("broker " + tag + " did not start");
    return b;
}

std::optional<json> read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        return json::parse(in);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

struct BenchRun {
    json sub;
    json pub;
    int sub_status = 0;
    int pub_status = 0;
};

/// Starts benchsub, then benchpub for warmup + duration - 2 s; `during` runs while they work.
BenchRun run_bench(const std::string& tag, const std::string& servers, int connections, int topics, int warmup_s,
                   int duration_s, const std::vector<pid_t>& cpu_pids, const std::vector<std::string>& stats_files,
                   const std::function<void(std::chrono::steady_clock::time_point)>& during = {}) {
    const auto log = g_work->path(tag + ".publog");
    std::vector<std::string> sub_argv{BENCHSUB_PATH,
                                      "--servers", servers,
                                      "--connections", std::to_string(connections),
                                      "--topics", std::to_string(topics),
                                      "--warmup", std::to_string(warmup_s),
                                      "--duration", std::to_string(duration_s),
                                      "--audit", log,
                                      "--report", "json"};
    for (auto p : cpu_pids) {
        sub_argv.push_back("--broker-pid");
        sub_argv.push_back(std::to_string(p));
    }
    for (const auto& f : stats_files) {
        sub_argv.push_back("--broker-stats");
        sub_argv.push_back(f);
    }
    const auto t0 = std::chrono::steady_clock::now();
    Process sub(sub_argv, g_work->path(tag + ".sub.json"));
    std::this_thread::sleep_for(500ms);
    Process pub({BENCHPUB_PATH, "--servers", servers, "--topics", std::to_string(topics), "--rate", "1", "--payload",
                 "140", "--duration", std::to_string(warmup_s + duration_s - 2), "--log", log, "--report", "json"},
                g_work->path(tag + ".pub.json"));
    if (during) during(t0);
    BenchRun r;
    r.pub_status = pub.wait();
    r.sub_status = sub.wait();
    r.sub = read_json_file(g_work->path(tag + ".sub.json")).value_or(json::object());
    r.pub = read_json_file(g_work->path(tag + ".pub.json")).value_or(json::object());
    return r;
}

double num(const json& j, const char* a, const char* b) {
    if (!j.contains(a) || !j[a].contains(b) || j[a][b].is_null()) return std::nan("");
    return j[a][b].get<double>();
}

std::string audit_text(const json& sub) {
    if (!sub.contains("audit") || sub["audit"].is_null()) return "audit missing";
    const auto& a = sub["audit"];
    return fmt::format("audit expected {} missing {} out_of_order {} duplicates {}", a.value("expected", 0),
                       a.value("missing", 0), a.value("out_of_order", 0), a.value("duplicates", 0));
}

bool audit_ok(const BenchRun& r) {
    return r.sub.contains("audit") && !r.sub["audit"].is_null() && r.sub["audit"].value("ok", false) &&
           r.pub.value("acked", 0) == r.pub.value("published", -1) && r.pub.value("published", 0) > 0;
}

Result vertical_scaling() {
    constexpr int kConnections = 10000, kTopics = 100, kWarmup = 15, kDuration = 60;
    auto b = start_broker("vertical", 0, free_port(), "", "");
    auto run = run_bench("vertical", b.address, kConnections, kTopics, kWarmup, kDuration, {b.proc->pid()}, {b.stats});
    b.proc->signal(SIGTERM);
    b.proc->wait();
    const double mean = num(run.sub, "latency_ms", "mean");
    const double p99 = num(run.sub, "latency_ms", "p99");
    const double count = num(run.sub, "latency_ms", "count");
    const double connected = num(run.sub, "connections", "connected");
    const double expected = double(kConnections) * kDuration;  // 1 msg/s/topic, one topic per connection
    Result r;
    r.pass = connected == kConnections && mean < kMaxMeanLatencyMs && p99 < kMaxP99LatencyMs &&
             count >= kMinSampleFraction * expected && audit_ok(run);
    r.detail = fmt::format(
        "{} of {} connected; {} samples (nominal {}); mean {:.2f} ms (< {}), p99 {:.2f} ms (< {}); published {} "
        "acked {}; {}; cpu {:.1f}%",
        connected, kConnections, count, expected, mean, kMaxMeanLatencyMs, p99, kMaxP99LatencyMs,
        run.pub.value("published", 0), run.pub.value("acked", 0), audit_text(run.sub),
        num(run.sub, "broker", "cpu_percent"));
    return r;
}

Result cpu_monotonicity() {
    constexpr int kTopics = 100, kWarmup = 10, kDuration = 20;
    const std::vector<int> levels{2500, 5000, 7500, 10000};
    std::vector<double> cpu;
    std::string detail;
    for (int n : levels) {
        const auto tag = "cpu" + std::to_string(n);
        auto b = start_broker(tag, 0, free_port(), "", "");
        auto run = run_bench(tag, b.address, n, kTopics, kWarmup, kDuration, {b.proc->pid()}, {b.stats});
        b.proc->signal(SIGTERM);
        b.proc->wait();
        cpu.push_back(num(run.sub, "broker", "cpu_percent"));
        detail += fmt::format("{}{}: {:.2f}%", detail.empty() ? "" : ", ", n, cpu.back());
    }
    bool mono = true;
    for (std::size_t i = 1; i < cpu.size(); ++i) mono = mono && cpu[i] >= cpu[i - 1];
    const bool bounded = cpu[3] < kCpuBlowupFactor * cpu[1];
    return {mono && bounded, fmt::format("broker CPU {}; non-decreasing {}; 10K/5K ratio {:.2f} (< {})", detail,
                                         mono ? "yes" : "no", cpu[3] / cpu[1], kCpuBlowupFactor)};
}

/// Weighted mean latency of series points with t in [from, to).
double series_mean(const json& sub, double from, double to) {
    double sum = 0, n = 0;
    if (!sub.contains("series")) return std::nan("");
    for (const auto& p : sub["series"]) {
        const double t = p.value("t", 0.0);
        if (t < from || t >= to) continue;
        const double c = p.value("count", 0.0);
        sum += c * p.value("mean_ms", 0.0);
        n += c;
    }
    return n > 0 ? sum / n : std::nan("");
}

Result horizontal_failover() {
    constexpr int kClients = 3000, kTopics = 30, kWarmup = 15, kDuration = 150;
    constexpr int kKillAt = kWarmup + 60;
    // The failover completes within the session timeout plus the peer timeout (5 s + 2 s);
    // the post-failover window starts after that and a margin.
    constexpr int kFailoverAllowance = 10;
    std::vector<std::uint16_t> ports, peer_ports;
    std::string peers;
    for (std::uint32_t i = 0; i < 3; ++i) {
        ports.push_back(free_port());
        peer_ports.push_back(free_port());
        peers += fmt::format("{}{}@127.0.0.1:{}", i ? "," : "", i, peer_ports.back());
    }
    std::vector<Broker> brokers;
    std::string servers;
    for (std::uint32_t i = 0; i < 3; ++i) {
        brokers.push_back(start_broker("h" + std::to_string(i), i, ports[i], peers,
                                       "127.0.0.1:" + std::to_string(peer_ports[i])));
        servers += (i ? "," : "") + brokers.back().address;
    }
    std::this_thread::sleep_for(2s);
    std::vector<std::uint64_t> before(3, 0), after(3, 0);
    auto conns = [&](std::size_t i) -> std::uint64_t {
        auto j = read_json_file(brokers[i].stats);
        return j ? j->value("connections", 0ull) : 0;
    };
    const std::size_t victim = 1;
    auto run = run_bench("horizontal", servers, kClients, kTopics, kWarmup, kDuration, {}, {},
                         [&](std::chrono::steady_clock::time_point t0) {
                             std::this_thread::sleep_until(t0 + std::chrono::seconds(kKillAt));
                             for (std::size_t i = 0; i < 3; ++i) before[i] = conns(i);
                             brokers[victim].proc->signal(SIGKILL);
                             brokers[victim].proc->wait();
                             std::this_thread::sleep_until(t0 + std::chrono::seconds(kWarmup + kDuration - 5));
                             for (std::size_t i = 0; i < 3; ++i)
                                 if (i != victim) after[i] = conns(i);
                         });
    for (std::size_t i = 0; i < 3; ++i)
        if (i != victim) {
            brokers[i].proc->signal(SIGTERM);
            brokers[i].proc->wait();
        }
    const double pre = series_mean(run.sub, kWarmup, kKillAt);
    const double post = series_mean(run.sub, kKillAt + kFailoverAllowance, kWarmup + kDuration);
    const double during = series_mean(run.sub, kKillAt, kWarmup + kDuration);
    const double target = kClients / 2.0;
    bool balanced = true;
    for (std::size_t i = 0; i < 3; ++i)
        if (i != victim) balanced = balanced && std::abs(double(after[i]) - target) <= kBalanceTolerance * target;
    Result r;
    r.pass = balanced && post <= kLatencyGrowthLimit * pre && audit_ok(run);
    r.detail = fmt::format(
        "connections before kill {}/{}/{}, after {}/{} (target {} +/- {:.0f}%); mean latency pre {:.2f} ms, post {:.2f} "
        "ms (limit {:.1f}x), including failover {:.2f} ms; published {} acked {}; {}",
        before[0], before[1], before[2], after[0], after[2], target, kBalanceTolerance * 100, pre, post,
        kLatencyGrowthLimit, during, run.pub.value("published", 0), run.pub.value("acked", 0), audit_text(run.sub));
    return r;
}

}  // namespace
}  // namespace migrant::acceptance

int main(int argc, char** argv) {
    using namespace migrant::acceptance;
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::off);
    std::signal(SIGPIPE, SIG_IGN);
    g_work = std::make_unique<Workdir>();

    const std::vector<Criterion> criteria{
        {1, "total order", total_order},
        {2, "at-least-once under crash", at_least_once_under_crash},
        {3, "coordinator uniqueness", coordinator_uniqueness},
        {4, "two-copy ack rule", two_copy_rule},
        {5, "partition fencing", partition_fencing},
        {6, "coordkv linearizability", kv_linearizability},
        {7, "chunking invariance", chunking_invariance},
        {8, "vertical scaling", vertical_scaling},
        {9, "CPU monotonicity", cpu_monotonicity},
        {10, "horizontal failover", horizontal_failover},
    };
    bool all = true;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.number) == only.end()) continue;
        Result r;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = {false, std::string("error: ") + e.what()};
        }
        all = all && r.pass;
        std::printf("criterion %2d %s %s (%.0fs): %s\n", c.number, r.pass ? "PASS" : "FAIL", c.name, seconds_since(t0),
                    r.detail.c_str());
        std::fflush(stdout);
    }
    g_work.reset();
    return all ? 0 : 1;
}
