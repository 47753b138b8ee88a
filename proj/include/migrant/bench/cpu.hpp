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
#include <optional>
#include <sys/types.h>
#include <thread>
#include <vector>

namespace migrant::bench {

/// utime + stime of `pid` in seconds, from /proc/<pid>/stat.
std::optional<double> process_cpu_seconds(pid_t pid);

/// Samples a process's CPU use once per `interval` on its own thread.
class CpuSampler {
public:
    explicit CpuSampler(pid_t pid, std::chrono::milliseconds interval = std::chrono::seconds(1));
    ~CpuSampler();

    void start();
    void stop();
    /// Mean of the per-interval percentages (100 = one core), empty without samples.
    std::optional<double> mean_percent() const;
    const std::vector<double>& samples() const { return samples_; }

private:
    pid_t pid_;
    std::chrono::milliseconds interval_;
    std::atomic<bool> running_{false};
    std::thread thread_;
    std::vector<double> samples_;
};

}  // namespace migrant::bench
