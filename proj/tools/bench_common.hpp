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

#include <algorithm>
#include <atomic>
#include <cctype>
#include <csignal>
#include <string>

#include <sys/resource.h>

#include "migrant/core/config.hpp"

namespace migrant::tools {

inline std::atomic<bool> g_stop{false};

inline void install_stop_handler() {
    std::signal(SIGINT, [](int) { g_stop.store(true); });
    std::signal(SIGTERM, [](int) { g_stop.store(true); });
    std::signal(SIGPIPE, SIG_IGN);
}

inline void raise_fd_limit() {
    rlimit lim{};
    if (::getrlimit(RLIMIT_NOFILE, &lim) == 0 && lim.rlim_cur < lim.rlim_max) {
        lim.rlim_cur = lim.rlim_max;
        ::setrlimit(RLIMIT_NOFILE, &lim);
    }
}

/// Bench durations: a bare number is seconds, otherwise any unit parse_duration accepts.
inline std::chrono::nanoseconds bench_duration(const std::string& text) {
    if (!text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c) || c == '.'; }))
        return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(std::stod(text)));
    return parse_duration(text);
}

}  // namespace migrant::tools
