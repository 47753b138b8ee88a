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

#include "migrant/client/client.hpp"

#include <algorithm>

namespace migrant::client {

class Client::Handler final : public LinkHandler {
public:
    Handler(Client& c, std::uint64_t gen) : c_(c), gen_(gen) {}
    void on_link_open() override { c_.link_open(gen_); }
    void on_link_bytes(std::span<const std::uint8_t> bytes) override { c_.link_bytes(gen_, bytes); }
    void on_link_closed() override { c_.link_closed(gen_); }

private:
    Client& c_;
    std::uint64_t gen_;
};

Client::Client(ClientConfig config, rt::Executor& exec, rt::Clock& clock, Connector& connector)
    : config_(std::move(config)),
      exec_(exec),
      clock_(clock),
      connector_(connector),
      rng_(config_.seed),
      dedupe_(config_.dedupe_capacity) {
    if (config_.missed_pongs == 0) throw InvalidArgument("missed_pongs must be >= 1");
}

Client::~Client() {
    if (link_) link_->close();
}

void Client::post_after(rt::Duration d, std::function<void()> fn) {
    std::weak_ptr<int> alive = alive_;
    exec_.post_after(d, [alive, fn = std::move(fn)] {
        if (alive.lock()) fn();
    });
}

void Client::start() {
    if (running_) return;
    running_ = true;
    connect();
}

void Client::stop() {
    running_ = false;
    drop_connection(false);
    std::vector<MsgId> ids;
    for (const auto& [id, p] : pending_) ids.push_back(id);
    for (const auto& id : ids) finish(id, PublishResult::Failed);
}

void Client::set_status(ClientStatus s) {
    status_ = s;
    if (on_status_) on_status_(s, address_);
}

void Client::connect() {
    if (!running_ || link_) return;
    const auto now = clock_.now();
    blacklist_.purge(now);
    try {
        address_ = pick_server(config_.servers, blacklist_, now, rng_);
    } catch (const AllServersBlacklisted& e) {
        post_after(std::max(e.retry_at - now, rt::Duration(1ms)), [this] { connect(); });
        return;
    }
    const auto gen = ++gen_;
    decoder_ = wire::DecodeBuffer{};
    connected_ = false;
    outstanding_pings_ = 0;
    handler_ = std::make_unique<Handler>(*this, gen);
    set_status(ClientStatus::Connecting);
    link_ = connector_.connect(address_, *handler_);
    post_after(config_.ping_interval, [this, gen] { ping_tick(gen); });
}

void Client::schedule_reconnect() {
    if (!running_) return;
    ++attempt_;
    post_after(config_.reconnect.delay(attempt_, rng_), [this] { connect(); });
}

void Client::drop_connection(bool blacklist) {
    ++gen_;
    if (link_) {
        link_->close();
        // The link may be on the call stack; release it from a fresh task.
        std::shared_ptr<Link> old(std::move(link_));
        std::shared_ptr<Handler> old_handler(std::move(handler_));
        exec_.post([old, old_handler] {});
    }
    if (connected_) ++diag_.disconnects;
    connected_ = false;
    if (blacklist && !address_.empty()) blacklist_.add(address_, clock_.now() + config_.blacklist_time);
    if (status_ != ClientStatus::Disconnected) set_status(ClientStatus::Disconnected);
}

void Client::link_open(std::uint64_t gen) {
    if (gen != gen_) return;
    send(wire::Connect{wire::Role::Client, ServerId{ServerId::kNone}, config_.name});
}

void Client::link_bytes(std::uint64_t gen, std::span<const std::uint8_t> bytes) {
    if (gen != gen_) return;
    std::vector<wire::Frame> frames;
    try {
        frames = decoder_.decode_frames(bytes);
    } catch (const std::exception&) {
        drop_connection(true);
        schedule_reconnect();
        return;
    }
    for (auto& f : frames) {
        if (gen != gen_) return;
        on_frame(std::move(f));
    }
}

void Client::link_closed(std::uint64_t gen) {
    if (gen != gen_) return;
    drop_connection(true);
    schedule_reconnect();
}

void Client::send(const wire::Frame& f) {
    if (link_) link_->send(wire::encode_frame(f));
}

void Client::on_frame(wire::Frame frame) {
    std::visit(
        [&](auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, wire::ConnAck>) {
                if (f.status == wire::ConnStatus::Accepted) {
                    connected_ = true;
                    attempt_ = 0;
                    ++diag_.connects;
                    set_status(ClientStatus::Connected);
                    on_connected();
                } else {
                    drop_connection(true);
                    schedule_reconnect();
                }
            } else if constexpr (std::is_same_v<T, wire::SubAck>) {
                auto it = subs_.find(f.topic);
                if (it == subs_.end()) return;
                if (!it->second.resume) it->second.resume = f.head;
                if (on_subscribed_) on_subscribed_(f.topic, f.head);
            } else if constexpr (std::is_same_v<T, wire::Notify>) {
                deliver(f.message, false);
            } else if constexpr (std::is_same_v<T, wire::Recover>) {
                deliver(f.message, true);
            } else if constexpr (std::is_same_v<T, wire::RecoverEnd>) {
                if (f.truncated) {
                    ++diag_.truncated;
                    if (on_truncated_) on_truncated_(f.topic);
                }
            } else if constexpr (std::is_same_v<T, wire::PubAck>) {
                finish(f.msg_id, PublishResult::Acked);
            } else if constexpr (std::is_same_v<T, wire::PubNack>) {
                ++diag_.nacks;
                auto it = pending_.find(f.msg_id);
                if (it == pending_.end()) return;
                auto d = config_.nack_retry;
                for (std::uint32_t i = 1; i < it->second.attempts && d < 1600ms; ++i) d *= 2;
                retry_later(f.msg_id, std::min<rt::Duration>(d, 1600ms));
            } else if constexpr (std::is_same_v<T, wire::Pong>) {
                outstanding_pings_ = 0;
            } else if constexpr (std::is_same_v<T, wire::Ping>) {
                send(wire::Pong{});
            } else if constexpr (std::is_same_v<T, wire::Close>) {
                drop_connection(true);
                schedule_reconnect();
            }
        },
        frame);
}

void Client::on_connected() {
    for (const auto& [topic, s] : subs_) send_subscribe(topic, s);
    std::vector<MsgId> ids;
    for (const auto& [id, p] : pending_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) transmit(id);
}

void Client::send_subscribe(const TopicName& topic, const Subscription& s) {
    send(wire::Subscribe{topic, s.resume.has_value(), s.resume.value_or(OrderKey{})});
}

void Client::subscribe(const TopicName& topic) {
    auto [it, fresh] = subs_.try_emplace(topic);
    if (fresh && connected_) send_subscribe(topic, it->second);
}

std::optional<OrderKey> Client::resume_key(const TopicName& topic) const {
    auto it = subs_.find(topic);
    if (it == subs_.end()) return std::nullopt;
    return it->second.resume;
}

void Client::deliver(const Message& m, bool recovered) {
    auto it = subs_.find(m.topic);
    if (it == subs_.end()) return;
    auto& s = it->second;
    if (m.key <= s.last_delivered) {
        ++diag_.out_of_order;
        return;
    }
    s.last_delivered = m.key;
    s.resume = std::max(s.resume.value_or(OrderKey{}), m.key);
    if (dedupe_.seen(m.publisher_msg_id)) {
        ++diag_.duplicates;
        return;
    }
    ++diag_.delivered;
    if (on_message_) on_message_(m, recovered);
}

MsgId Client::publish(const TopicName& topic, std::string payload, bool require_ack, PublishFn done) {
    if (payload.size() > Message::kMaxPayload) throw InvalidArgument("payload exceeds 65535 bytes");
    const auto id = MsgId::random(rng_);
    if (!require_ack) {
        if (connected_) send(wire::Publish{topic, id, false, std::move(payload)});
        return id;
    }
    const auto now = clock_.now();
    pending_[id] = Pending{topic, std::move(payload), std::move(done), 0, now, now, 0};
    transmit(id);
    return id;
}

void Client::transmit(const MsgId& id) {
    auto it = pending_.find(id);
    if (it == pending_.end()) return;
    auto& p = it->second;
    if (clock_.now() - p.first_sent >= config_.retry_budget) {
        finish(id, PublishResult::Failed);
        return;
    }
    if (!connected_) {
        // Sent again on the next CONNACK; check the budget meanwhile.
        retry_later(id, config_.ack_timeout);
        return;
    }
    ++p.attempts;
    ++diag_.publish_attempts;
    send(wire::Publish{p.topic, id, true, p.payload});
    arm_ack_timer(id);
}

void Client::arm_ack_timer(const MsgId& id) { retry_later(id, config_.ack_timeout); }

void Client::retry_later(const MsgId& id, rt::Duration delay) {
    auto it = pending_.find(id);
    if (it == pending_.end()) return;
    const auto timer = next_timer_++;
    it->second.timer = timer;
    post_after(delay, [this, id, timer] {
        auto it = pending_.find(id);
        if (it == pending_.end() || it->second.timer != timer) return;
        transmit(id);
    });
}

void Client::finish(const MsgId& id, PublishResult r) {
    auto node = pending_.extract(id);
    if (node.empty()) return;
    if (node.mapped().done) node.mapped().done(r, node.mapped().attempts);
}

void Client::ping_tick(std::uint64_t gen) {
    if (gen != gen_ || !link_) return;
    if (outstanding_pings_ >= config_.missed_pongs) {
        drop_connection(true);
        schedule_reconnect();
        return;
    }
    ++outstanding_pings_;
    if (connected_) send(wire::Ping{});
    post_after(config_.ping_interval, [this, gen] { ping_tick(gen); });
}

}  // namespace migrant::client
