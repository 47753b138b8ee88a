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

#include "migrant/net/event_loop.hpp"

#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <future>
#include <memory>

#include <spdlog/spdlog.h>

namespace migrant::net {

namespace asio = boost::asio;

EventLoop::EventLoop(std::string name) : name_(std::move(name)) {}

EventLoop::~EventLoop() { stop(); }

void EventLoop::start() {
    if (thread_.joinable()) return;
    work_.emplace(ctx_.get_executor());
    thread_ = std::thread([this] {
        for (;;) {
            try {
                ctx_.run();
                return;
            } catch (const std::exception& e) {
                spdlog::error("{}: task failed: {}", name_, e.what());
            }
        }
    });
}

void EventLoop::stop() {
    work_.reset();
    ctx_.stop();
    if (thread_.joinable()) thread_.join();
}

void EventLoop::post(rt::Task task) { asio::post(ctx_, std::move(task)); }

void EventLoop::post_after(rt::Duration delay, rt::Task task) {
    auto timer = std::make_shared<asio::steady_timer>(ctx_, delay);
    timer->async_wait([timer, task = std::move(task)](const boost::system::error_code& ec) {
        if (!ec) task();
    });
}

void EventLoop::run_sync(rt::Task task) {
    std::promise<void> done;
    auto f = done.get_future();
    post([&] {
        try {
            task();
            done.set_value();
        } catch (...) {
            done.set_exception(std::current_exception());
        }
    });
    f.get();
}

}  // namespace migrant::net
