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

#include <boost/asio/executor_work_guard.hpp>
#include <boost/asio/io_context.hpp>
#include <optional>
#include <string>
#include <thread>

#include "migrant/runtime/executor.hpp"

namespace migrant::net {

/// One thread running an io_context. Tasks posted from one thread run in posting order.
class EventLoop final : public rt::Executor {
public:
    explicit EventLoop(std::string name = "loop");
    ~EventLoop() override;

    EventLoop(const EventLoop&) = delete;
    EventLoop& operator=(const EventLoop&) = delete;

    void start();
    /// Stops the thread and joins it. Pending tasks are dropped.
    void stop();

    void post(rt::Task task) override;
    void post_after(rt::Duration delay, rt::Task task) override;

    /// Runs `task` on the loop and waits for it to finish. Must not be called from the loop.
    void run_sync(rt::Task task);

    bool in_loop_thread() const { return std::this_thread::get_id() == thread_.get_id(); }
    boost::asio::io_context& context() { return ctx_; }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    boost::asio::io_context ctx_{1};
    std::optional<boost::asio::executor_work_guard<boost::asio::io_context::executor_type>> work_;
    std::thread thread_;
};

}  // namespace migrant::net
