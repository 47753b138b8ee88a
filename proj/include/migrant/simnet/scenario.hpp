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

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "migrant/runtime/executor.hpp"
#include "migrant/simnet/network.hpp"

namespace migrant::simnet {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FaultEvent {
    enum class Kind { Crash, Restart, Partition, Heal, DropNext };
    /// Crash: a seeded choice among live servers. Restart: the most recently crashed server.
    static constexpr int kAny = -1;

    rt::Duration at{};
    Kind kind = Kind::Crash;
    int server = 0;  // Crash, Restart
    std::vector<std::set<std::size_t>> groups;  // Partition
    std::size_t from = 0, to = 0;  // DropNext
    std::uint32_t count = 1;
};

struct Workload {
    std::size_t topics = 0;
    std::size_t publishers = 0;
    std::size_t subscribers = 0;
    /// Topics per subscriber, drawn without replacement; 0 subscribes to every topic.
    std::size_t topics_per_subscriber = 0;
    /// Publications per second per publisher.
    double rate = 1.0;
    std::size_t payload = 16;
    bool ack = true;
    rt::Duration start = 3s;
    rt::Duration stop = 10s;
};

struct Scenario {
    std::string name;
    std::size_t servers = 3;
    LinkConfig link;
    /// Virtual time at which undecided assertions become HorizonExceeded.
    rt::Duration horizon = 60s;
    std::uint32_t num_groups = 16;
    std::size_t cache_depth = 1000;
    rt::Duration client_ping = 5s;
    Workload workload;
    std::vector<FaultEvent> faults;
    std::vector<std::string> assertions;
};

/// Parses the scenario text format (see docs/scenarios.md).
Scenario parse_scenario(const std::string& text, std::string name = "scenario");
Scenario load_scenario(const std::string& path);

}  // namespace migrant::simnet
