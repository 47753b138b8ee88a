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

#include "migrant/runtime/virtual_scheduler.hpp"

namespace migrant::rt {

void VirtualScheduler::schedule_at(TimePoint at, Task task, Token token) {
    if (at < now_) at = now_;
    queue_.push(Event{at, next_index_++, std::move(task), std::move(token)});
}

bool VirtualScheduler::step() {
    if (queue_.empty()) return false;
    // priority_queue::top is const; the event is copied out before popping.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ = ev.at;
    if (ev.token && !*ev.token) return true;
    ++executed_;
    ev.task();
    return true;
}

void VirtualScheduler::run_until(TimePoint until) {
    while (!queue_.empty() && queue_.top().at <= until) step();
    if (now_ < until) now_ = until;
}

std::uint64_t VirtualScheduler::run_all(std::uint64_t max_events) {
    std::uint64_t n = 0;
    while (n < max_events && step()) ++n;
    return n;
}

}  // namespace migrant::rt
