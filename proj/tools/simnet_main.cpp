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

// simnet: runs deterministic cluster scenarios under virtual time.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <json.hpp>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "migrant/simnet/runner.hpp"

using namespace migrant;
using namespace migrant::simnet;

namespace {

std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& s) {
    const auto dots = s.find("..");
    try {
        if (dots == std::string::npos) {
            auto v = std::stoull(s);
            return {v, v};
        }
        auto a = std::stoull(s.substr(0, dots));
        auto b = std::stoull(s.substr(dots + 2));
        if (b < a) throw CLI::ValidationError("--seeds", "empty range " + s);
        return {a, b};
    } catch (const std::logic_error&) {
        throw CLI::ValidationError("--seeds", "expected N or A..B, got " + s);
    }
}

nlohmann::json to_json(const RunReport& r) {
    nlohmann::json j;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["outcome"] = outcome_name(r.outcome);
    j["trace_hash"] = fmt::format("{:016x}", r.trace_hash);
    j["events"] = r.events;
    j["end_us"] = r.end_us;
    j["published"] = r.published;
    j["acked"] = r.acked;
    j["failed"] = r.failed;
    j["delivered"] = r.delivered;
    for (const auto& a : r.assertions) {
        nlohmann::json aj{{"name", a.name}, {"verdict", verdict_name(a.verdict)}};
        if (!a.detail.empty()) aj["detail"] = a.detail;
        if (a.verdict == Verdict::Fail) aj["minimal_prefix"] = a.prefix;
        j["assertions"].push_back(aj);
    }
    return j;
}

void print_text(const RunReport& r, bool trace_tail) {
    fmt::print("{} seed={} outcome={} events={} hash={:016x} end={:.3f}s published={} acked={} failed={} delivered={}\n",
               r.scenario, r.seed, outcome_name(r.outcome), r.events, r.trace_hash, r.end_us / 1e6, r.published, r.acked,
               r.failed, r.delivered);
    for (const auto& a : r.assertions) {
        fmt::print("  {:<24} {}", a.name, verdict_name(a.verdict));
        if (!a.detail.empty()) fmt::print("  {}", a.detail);
        if (a.verdict == Verdict::Fail) fmt::print("  (minimal prefix {} events)", a.prefix);
        fmt::print("\n");
    }
    if (trace_tail && !r.minimal_prefix.empty()) {
        const auto n = r.minimal_prefix.size();
        const auto from = n > 40 ? n - 40 : 0;
        fmt::print("minimal failing prefix, last {} of {} events:\n", n - from, n);
        for (auto i = from; i < n; ++i) fmt::print("  #{:<7} {}\n", i, to_string(r.minimal_prefix[i]));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulation of a migrant cluster"};
    app.require_subcommand(1);

    std::string path;
    std::uint64_t seed = 1;
    std::string seeds = "1..100";
    std::string format = "text";
    bool full_trace = false;
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Show server log output");

    auto* run = app.add_subcommand("run", "Run one seed of a scenario");
    run->add_option("scenario", path, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Seed");
    run->add_option("--report", format, "Report format")->check(CLI::IsMember({"text", "json"}));
    run->add_flag("--trace", full_trace, "Print the full event trace");

    auto* sweep = app.add_subcommand("sweep", "Run a scenario over a range of seeds");
    sweep->add_option("scenario", path, "Scenario file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--seeds", seeds, "Seed range A..B");
    sweep->add_option("--report", format, "Report format")->check(CLI::IsMember({"text", "json"}));

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::off);

    Scenario sc;
    try {
        sc = load_scenario(path);
    } catch (const std::exception& e) {
        fmt::print(stderr, "{}: {}\n", path, e.what());
        return 2;
    }

    if (*run) {
        RunOptions opt;
        opt.keep_trace = full_trace;
        const auto r = run_scenario(sc, seed, opt);
        if (format == "json") {
            fmt::print("{}\n", to_json(r).dump(2));
        } else {
            print_text(r, true);
        }
        for (std::size_t i = 0; i < r.trace.size(); ++i) fmt::print("#{:<7} {}\n", i, to_string(r.trace[i]));
        return r.outcome == Outcome::Pass ? 0 : 1;
    }

    const auto [a, b] = parse_range(seeds);
    std::size_t pass = 0, fail = 0, horizon = 0;
    nlohmann::json runs = nlohmann::json::array();
    const auto started = std::chrono::steady_clock::now();
    for (auto s = a; s <= b; ++s) {
        RunOptions opt;
        opt.keep_prefix = false;
        auto r = run_scenario(sc, s, opt);
        switch (r.outcome) {
            case Outcome::Pass: ++pass; break;
            case Outcome::Fail: ++fail; break;
            case Outcome::HorizonExceeded: ++horizon; break;
        }
        if (format == "json") {
            runs.push_back(to_json(r));
        } else if (r.outcome != Outcome::Pass) {
            print_text(r, false);
        } else {
            fmt::print("{} seed={} pass events={} hash={:016x}\n", r.scenario, s, r.events, r.trace_hash);
        }
        std::fflush(stdout);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (format == "json") {
        nlohmann::json j{{"scenario", sc.name}, {"seeds", seeds},   {"pass", pass},
                         {"fail", fail},        {"horizon_exceeded", horizon}, {"wall_s", wall},
                         {"runs", runs}};
        fmt::print("{}\n", j.dump(2));
    } else {
        fmt::print("{}: {} seeds, {} pass, {} fail, {} horizon-exceeded, {:.1f}s wall\n", sc.name, b - a + 1, pass, fail,
                   horizon, wall);
    }
    return fail + horizon == 0 ? 0 : 1;
}
