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

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "bench_common.hpp"
#include "migrant/bench/runner.hpp"

using namespace migrant;

int main(int argc, char** argv) {
    CLI::App app{"publish timestamped messages at a fixed rate per topic"};
    bench::PubOptions opt;
    std::string duration = "60", warmup = "0", report = "text";
    bool no_ack = false;
    app.add_option("--servers", opt.servers, "host:port[=weight],...")->capture_default_str();
    app.add_option("--topics", opt.topics, "number of topics")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--rate", opt.rate, "messages per second per topic")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--payload", opt.payload, "payload bytes, 8-byte timestamp included")
        ->capture_default_str()
        ->check(CLI::Range(8, 65535));
    app.add_option("--connections", opt.connections, "publisher connections, topics spread over them")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--warmup", warmup, "wait after connecting before publishing")->capture_default_str();
    app.add_option("--duration", duration, "publishing time (seconds or 250ms, 2min, ...)")->capture_default_str();
    app.add_option("--report", report, "json or text")->capture_default_str()->check(CLI::IsMember({"json", "text"}));
    app.add_option("--log", opt.log_path, "write the publish log here for a benchsub audit");
    app.add_option("--seed", opt.seed)->capture_default_str();
    app.add_option("--topic-prefix", opt.topic_prefix)->capture_default_str();
    app.add_flag("--no-ack", no_ack, "publish at most once, without PUBACK");
    CLI11_PARSE(app, argc, argv);
    opt.ack = !no_ack;
    spdlog::set_level(spdlog::level::warn);
    tools::install_stop_handler();

    bench::PubReport r;
    try {
        opt.duration = tools::bench_duration(duration);
        opt.warmup = tools::bench_duration(warmup);
        r = bench::run_benchpub(opt, &tools::g_stop);
    } catch (const std::exception& e) {
        std::cerr << "benchpub: " << e.what() << "\n";
        return 2;
    }
    std::cout << (report == "json" ? bench::to_json(opt, r) + "\n" : bench::to_text(r));
    return r.connected ? 0 : 1;
}
