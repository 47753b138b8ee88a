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

#include "migrant/bench/cpu.hpp"

#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <unistd.h>

namespace migrant::bench {

std::optional<double> process_cpu_seconds(pid_t pid) {
    std::ifstream in("/proc/" + std::to_string(pid) + "/stat");
    std::string line;
    if (!in || !std::getline(in, line)) return std::nullopt;
    // The command name may contain spaces; fields resume after the last ')'.
    const auto close = line.rfind(')');
    if (close == std::string::npos) return std::nullopt;
    std::istringstream rest(line.substr(close + 2));
    std::string field;
    unsigned long utime = 0, stime = 0;
    // Fields 3..13 precede utime (14) and stime (15).
    for (int i = 3; i <= 13; ++i) rest >> field;
    if (!(rest >> utime >> stime)) return std::nullopt;
    return static_cast<double>(utime + stime) / static_cast<double>(::sysconf(_SC_CLK_TCK));
}

CpuSampler::CpuSampler(pid_t pid, std::chrono::milliseconds interval) : pid_(pid), interval_(interval) {}

CpuSampler::~CpuSampler() { stop(); }

void CpuSampler::start() {
    if (running_.exchange(true)) return;
    thread_ = std::thread([this] {
        auto prev_cpu = process_cpu_seconds(pid_);
        auto prev_t = std::chrono::steady_clock::now();
        while (running_.load()) {
            auto next = prev_t + interval_;
            while (running_.load() && std::chrono::steady_clock::now() < next)
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
            if (!running_.load()) break;
            const auto cpu = process_cpu_seconds(pid_);
            const auto t = std::chrono::steady_clock::now();
            if (cpu && prev_cpu) {
                const double wall = std::chrono::duration<double>(t - prev_t).count();
                samples_.push_back(100.0 * (*cpu - *prev_cpu) / wall);
            }
            prev_cpu = cpu;
            prev_t = t;
        }
    });
}

void CpuSampler::stop() {
    running_.store(false);
    if (thread_.joinable()) thread_.join();
}

std::optional<double> CpuSampler::mean_percent() const {
    if (samples_.empty()) return std::nullopt;
    return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
}

}  // namespace migrant::bench
