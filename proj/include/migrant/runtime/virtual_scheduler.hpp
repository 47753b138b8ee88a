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
#include <memory>
#include <queue>
#include <vector>

#include "migrant/runtime/executor.hpp"

namespace migrant::rt {

/// Single-threaded discrete-event scheduler on a virtual clock. Events run in
/// (time, insertion index) order, so a run is a pure function of what is scheduled.
class VirtualScheduler final : public Clock {
public:
    /// Liveness token: events scheduled through a dead token are discarded.
    using Token = std::shared_ptr<bool>;

    TimePoint now() const override { return now_; }

    void schedule_at(TimePoint at, Task task, Token token = nullptr);
    void schedule_after(Duration d, Task task, Token token = nullptr) {
        schedule_at(now_ + d, std::move(task), std::move(token));
    }

    /// Runs the next event. Returns false when the queue is empty.
    bool step();
    /// Runs every event with time <= `until`, then advances the clock to `until`.
    void run_until(TimePoint until);
    void run_for(Duration d) { run_until(now_ + d); }
    /// Runs until the queue drains or `max_events` have executed.
    std::uint64_t run_all(std::uint64_t max_events = UINT64_MAX);

    std::uint64_t executed() const noexcept { return executed_; }
    bool empty() const noexcept { return queue_.empty(); }
    TimePoint next_time() const { return queue_.top().at; }

    static TimePoint epoch() { return TimePoint{}; }

private:
    struct Event {
        TimePoint at;
        std::uint64_t index;
        Task task;
        Token token;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.index > b.index;
        }
    };

    TimePoint now_{};
    std::uint64_t next_index_ = 0;
    std::uint64_t executed_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

/// Executor facade over a VirtualScheduler, optionally bound to a liveness token.
class VirtualExecutor final : public Executor {
public:
    VirtualExecutor(VirtualScheduler& sched, VirtualScheduler::Token token = nullptr)
        : sched_(sched), token_(std::move(token)) {}

    void post(Task task) override { sched_.schedule_after(Duration::zero(), std::move(task), token_); }
    void post_after(Duration delay, Task task) override {
        sched_.schedule_after(delay, std::move(task), token_);
    }

private:
    VirtualScheduler& sched_;
    VirtualScheduler::Token token_;
};

}  // namespace migrant::rt
