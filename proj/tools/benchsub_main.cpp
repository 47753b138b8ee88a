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

#include <filesystem>
#include <iostream>
#include <thread>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "bench_common.hpp"
#include "migrant/bench/runner.hpp"

using namespace migrant;
using namespace std::chrono_literals;

int main(int argc, char** argv) {
    CLI::App app{"open subscriber connections and measure end-to-end latency"};
    bench::SubOptions opt;
    std::string duration = "60", warmup = "15", report = "text";
    std::vector<int> pids;
    bench::PubOptions pub;
    pub.rate = 0;
    app.add_option("--servers", opt.servers, "host:port[=weight],...")->capture_default_str();
    app.add_option("--connections", opt.connections, "subscriber connections")->capture_default_str();
    app.add_option("--topics", opt.topics, "each connection subscribes to one random topic of this many")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--duration", duration, "measurement time after the warm-up")->capture_default_str();
    app.add_option("--warmup", warmup, "time before samples are kept")->capture_default_str();
    app.add_option("--rate", pub.rate, "run a publisher in this process at this rate per topic (0: none)")
        ->capture_default_str();
    app.add_option("--payload", pub.payload, "payload bytes of the in-process publisher")
        ->capture_default_str()
        ->check(CLI::Range(8, 65535));
    app.add_option("--report", report, "json or text")->capture_default_str()->check(CLI::IsMember({"json", "text"}));
    app.add_option("--loops", opt.loops, "event loops multiplexing the connections")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--connect-rate", opt.connect_rate, "new connections per second")->capture_default_str();
    app.add_option("--audit", opt.audit_path, "benchpub publish log to audit deliveries against");
    app.add_option("--broker-pid", pids, "broker process to sample CPU from (repeatable)");
    app.add_option("--broker-stats", opt.broker_stats, "migrantd stats file for outgoing bytes (repeatable)");
    app.add_option("--seed", opt.seed)->capture_default_str();
    app.add_option("--topic-prefix", opt.topic_prefix)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::warn);
    tools::install_stop_handler();
    tools::raise_fd_limit();
    for (int p : pids) opt.broker_pids.push_back(static_cast<pid_t>(p));

    bench::SubReport r;
    std::optional<bench::PubReport> pr;
    try {
        opt.duration = tools::bench_duration(duration);
        opt.warmup = tools::bench_duration(warmup);
        std::thread publisher;
        bool own_log = false;
        if (pub.rate > 0) {
            pub.servers = opt.servers;
            pub.topics = opt.topics;
            pub.topic_prefix = opt.topic_prefix;
            pub.seed = opt.seed ^ 0x9e3779b97f4a7c15ull;
            pub.duration = std::max<rt::Duration>(opt.warmup + opt.duration - opt.audit_margin, 1s);
            own_log = opt.audit_path.empty();
            if (own_log) {
                pub.log_path = (std::filesystem::temp_directory_path() /
                                ("benchsub-" + std::to_string(::getpid()) + ".publog"))
                                   .string();
                opt.audit_path = pub.log_path;
            } else {
                pub.log_path = opt.audit_path;
            }
            publisher = std::thread([&] {
                std::this_thread::sleep_for(500ms);
                pr = bench::run_benchpub(pub, &tools::g_stop);
            });
        }
        r = bench::run_benchsub(opt, &tools::g_stop);
        if (publisher.joinable()) publisher.join();
        if (own_log) std::filesystem::remove(pub.log_path);
    } catch (const std::exception& e) {
        std::cerr << "benchsub: " << e.what() << "\n";
        return 2;
    }
    if (report == "json") {
        auto j = nlohmann::json::parse(bench::to_json(opt, r));
        if (pr) j["publisher"] = nlohmann::json::parse(bench::to_json(pub, *pr));
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << bench::to_text(r);
        if (pr) std::cout << "publisher: " << bench::to_text(*pr);
    }
    if (r.aborted || !r.error.empty()) return 1;
    if (r.audit && !r.audit->ok()) return 3;
    return 0;
}
