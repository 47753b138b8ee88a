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

#include "migrant/simnet/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "migrant/core/config.hpp"
#include "migrant/simnet/assertions.hpp"

namespace migrant::simnet {
namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    throw ScenarioError("line " + std::to_string(line) + ": " + what);
}

rt::Duration duration(std::size_t line, const std::string& s) {
    try {
        return std::chrono::duration_cast<rt::Duration>(parse_duration(s));
    } catch (const ConfigError& e) {
        fail(line, e.what());
    }
}

std::uint64_t number(std::size_t line, const std::string& s) {
    try {
        std::size_t used = 0;
        if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
        auto v = std::stoull(s, &used);
        if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    fail(line, "expected a non-negative integer, got '" + s + "'");
}

double real(std::size_t line, const std::string& s) {
    try {
        std::size_t used = 0;
        auto v = std::stod(s, &used);
        if (used == s.size() && v >= 0) return v;
    } catch (const std::logic_error&) {
    }
    fail(line, "expected a non-negative number, got '" + s + "'");
}

int server_arg(std::size_t line, const std::string& s) {
    if (s == "any") return FaultEvent::kAny;
    return static_cast<int>(number(line, s));
}

FaultEvent parse_fault(std::size_t line, const std::vector<std::string>& w) {
    // at <time> <kind> args...
    if (w.size() < 3) fail(line, "expected 'at <time> <fault> ...'");
    FaultEvent f;
    f.at = duration(line, w[1]);
    const auto& kind = w[2];
    auto args = std::vector<std::string>(w.begin() + 3, w.end());
    if (kind == "crash" || kind == "restart") {
        if (args.size() != 1) fail(line, kind + " takes one server index or 'any'");
        f.kind = kind == "crash" ? FaultEvent::Kind::Crash : FaultEvent::Kind::Restart;
        if (f.kind == FaultEvent::Kind::Restart && args[0] == "crashed") {
            f.server = FaultEvent::kAny;
        } else if (f.kind == FaultEvent::Kind::Restart && args[0] == "any") {
            fail(line, "restart takes a server index or 'crashed'");
        } else {
            f.server = server_arg(line, args[0]);
        }
    } else if (kind == "partition") {
        f.kind = FaultEvent::Kind::Partition;
        f.groups.emplace_back();
        for (const auto& a : args) {
            if (a == "|" || a == "/") {
                f.groups.emplace_back();
                continue;
            }
            f.groups.back().insert(number(line, a));
        }
        if (f.groups.size() < 2) fail(line, "partition needs at least two groups separated by '|'");
        for (const auto& g : f.groups)
            if (g.empty()) fail(line, "empty partition group");
    } else if (kind == "heal") {
        if (!args.empty()) fail(line, "heal takes no arguments");
        f.kind = FaultEvent::Kind::Heal;
    } else if (kind == "drop") {
        if (args.size() != 3) fail(line, "drop takes <from> <to> <count>");
        f.kind = FaultEvent::Kind::DropNext;
        f.from = number(line, args[0]);
        f.to = number(line, args[1]);
        f.count = static_cast<std::uint32_t>(number(line, args[2]));
    } else {
        fail(line, "unknown fault '" + kind + "'");
    }
    return f;
}

}  // namespace

Scenario parse_scenario(const std::string& text, std::string name) {
    Scenario s;
    s.name = std::move(name);
    std::istringstream in(text);
    std::string raw;
    for (std::size_t n = 1; std::getline(in, raw); ++n) {
        const auto w = split_words(raw.substr(0, raw.find('#')));
        if (w.empty()) continue;
        const auto& key = w[0];
        auto one = [&]() -> const std::string& {
            if (w.size() != 2) fail(n, key + " takes one value");
            return w[1];
        };
        if (key == "at") {
            s.faults.push_back(parse_fault(n, w));
        } else if (key == "assert") {
            if (w.size() != 2) fail(n, "assert takes one name");
            if (!known_assertion(w[1])) fail(n, "unknown assertion '" + w[1] + "'");
            s.assertions.push_back(w[1]);
        } else if (key == "name") {
            s.name = one();
        } else if (key == "servers") {
            s.servers = number(n, one());
        } else if (key == "horizon") {
            s.horizon = duration(n, one());
        } else if (key == "link_delay") {
            if (w.size() != 3) fail(n, "link_delay takes <min> <max>");
            s.link.min_delay = duration(n, w[1]);
            s.link.max_delay = duration(n, w[2]);
            if (s.link.max_delay < s.link.min_delay) fail(n, "link_delay max < min");
        } else if (key == "groups") {
            s.num_groups = static_cast<std::uint32_t>(number(n, one()));
        } else if (key == "cache_depth") {
            s.cache_depth = number(n, one());
        } else if (key == "client_ping") {
            s.client_ping = duration(n, one());
        } else if (key == "topics") {
            s.workload.topics = number(n, one());
        } else if (key == "publishers") {
            s.workload.publishers = number(n, one());
        } else if (key == "subscribers") {
            s.workload.subscribers = number(n, one());
        } else if (key == "topics_per_subscriber") {
            s.workload.topics_per_subscriber = number(n, one());
        } else if (key == "rate") {
            s.workload.rate = real(n, one());
        } else if (key == "payload") {
            s.workload.payload = number(n, one());
        } else if (key == "ack") {
            const auto& v = one();
            if (v != "on" && v != "off") fail(n, "ack is 'on' or 'off'");
            s.workload.ack = v == "on";
        } else if (key == "start") {
            s.workload.start = duration(n, one());
        } else if (key == "stop") {
            s.workload.stop = duration(n, one());
        } else {
            fail(n, "unknown key '" + key + "'");
        }
    }
    if (s.servers == 0) throw ScenarioError("servers must be >= 1");
    if (s.workload.stop < s.workload.start) throw ScenarioError("stop before start");
    if (s.horizon < s.workload.stop) throw ScenarioError("horizon before stop");
    if (s.workload.publishers > 0 && s.workload.topics == 0) throw ScenarioError("publishers need topics");
    if (s.workload.payload > 65535) throw ScenarioError("payload exceeds 65535 bytes");
    if (s.workload.topics_per_subscriber > s.workload.topics)
        throw ScenarioError("topics_per_subscriber exceeds topics");
    for (const auto& f : s.faults) {
        auto check = [&](std::size_t i) {
            if (i >= s.servers) throw ScenarioError("fault names server " + std::to_string(i) + " of " + std::to_string(s.servers));
        };
        if ((f.kind == FaultEvent::Kind::Crash || f.kind == FaultEvent::Kind::Restart) && f.server >= 0)
            check(static_cast<std::size_t>(f.server));
        if (f.kind == FaultEvent::Kind::DropNext) {
            check(f.from);
            check(f.to);
        }
        for (const auto& g : f.groups)
            for (auto i : g) check(i);
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), std::filesystem::path(path).stem().string());
}

}  // namespace migrant::simnet
