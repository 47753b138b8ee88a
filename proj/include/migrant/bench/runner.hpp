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

#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

#include "migrant/bench/audit.hpp"
#include "migrant/bench/stats.hpp"
#include "migrant/runtime/executor.hpp"

namespace migrant::bench {

using namespace std::chrono_literals;

std::string topic_name(const std::string& prefix, std::uint32_t index);

struct PubOptions {
    std::string servers = "127.0.0.1:7400";  // client::ServerList text
    std::uint32_t topics = 1;
    double rate = 1.0;  // messages per second per topic
    std::size_t payload = 140;
    /// Topic i is published on connection i % connections.
    std::uint32_t connections = 1;
    rt::Duration duration = 60s;
    /// Wait after connecting, before the first publication.
    rt::Duration warmup = 0s;
    bool ack = true;
    std::string topic_prefix = "topic-";
    std::uint64_t seed = 1;
    rt::Duration connect_timeout = 10s;
    /// Time allowed for outstanding acknowledgments after the last publication.
    rt::Duration drain = 5s;
    /// When set, the publish log is written here at the end.
    std::string log_path;
};

struct PubReport {
    bool connected = false;
    std::uint64_t published = 0;
    std::uint64_t acked = 0;
    std::uint64_t failed = 0;
    std::uint64_t unanswered = 0;
    double elapsed_s = 0;
    double rate_per_s = 0;
    std::string error;
    std::vector<PublishRecord> records;
};

/// Publishes every topic at the configured rate. `stop` ends it early.
PubReport run_benchpub(const PubOptions& opt, const std::atomic<bool>* stop = nullptr);

struct SubOptions {
    std::string servers = "127.0.0.1:7400";
    std::uint32_t connections = 1;
    std::uint32_t topics = 1;
    rt::Duration duration = 60s;
    rt::Duration warmup = 15s;
    std::uint32_t loops = 2;
    std::uint64_t seed = 1;
    std::string topic_prefix = "topic-";
    /// New connections per second during the ramp.
    double connect_rate = 2000;
    double min_connected_fraction = 0.95;
    /// Publish log to audit against; waited for at the end.
    std::string audit_path;
    rt::Duration audit_wait = 15s;
    /// Publications sent within this margin of the end are not expected.
    rt::Duration audit_margin = 2s;
    std::vector<pid_t> broker_pids;
    /// migrantd stats files, for outgoing bytes.
    std::vector<std::string> broker_stats;
};

struct SeriesPoint {
    std::uint32_t t = 0;  // seconds since start
    std::uint64_t count = 0;
    double mean_ms = 0;
    std::uint64_t connected = 0;
};

struct SubReport {
    std::uint32_t requested = 0;
    std::uint32_t connected = 0;  // at the end of the warm-up
    std::uint32_t failed = 0;
    std::uint64_t reconnects = 0;
    std::map<std::string, std::uint32_t> by_server;  // at the end
    LatencyStats latency;
    std::uint64_t delivered = 0;
    std::uint64_t recovered = 0;
    std::optional<double> cpu_percent;
    std::vector<double> cpu_per_broker;
    std::optional<double> gbps;
    std::vector<SeriesPoint> series;
    std::optional<AuditResult> audit;
    bool aborted = false;
    std::string error;
};

/// `connections` subscribers, each on one random topic, multiplexed on `loops` event loops.
SubReport run_benchsub(const SubOptions& opt, const std::atomic<bool>* stop = nullptr);

/// Stable JSON schemas, documented in docs/bench.md.
std::string to_json(const PubOptions& opt, const PubReport& r);
std::string to_json(const SubOptions& opt, const SubReport& r);
std::string to_text(const PubReport& r);
std::string to_text(const SubReport& r);

/// Reads "bytes_out" from a migrantd stats file.
std::optional<std::uint64_t> read_bytes_out(const std::string& stats_path);

}  // namespace migrant::bench
