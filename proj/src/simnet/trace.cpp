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

#include "migrant/simnet/trace.hpp"

#include <fmt/format.h>

#include "migrant/core/hash.hpp"

namespace migrant::simnet {

const char* ev_name(Ev e) noexcept {
    switch (e) {
        case Ev::Crash: return "crash";
        case Ev::Restart: return "restart";
        case Ev::Partition: return "partition";
        case Ev::Heal: return "heal";
        case Ev::DropNext: return "drop-next";
        case Ev::Won: return "won";
        case Ev::Lost: return "lost";
        case Ev::Assign: return "assign";
        case Ev::Append: return "append";
        case Ev::PubAck: return "puback";
        case Ev::PubNack: return "pubnack";
        case Ev::Gap: return "gap";
        case Ev::Reconcile: return "reconcile";
        case Ev::Fence: return "fence";
        case Ev::Ready: return "ready";
        case Ev::PeerUp: return "peer-up";
        case Ev::PeerDown: return "peer-down";
        case Ev::Connected: return "connected";
        case Ev::Disconnected: return "disconnected";
        case Ev::Publish: return "publish";
        case Ev::Acked: return "acked";
        case Ev::Failed: return "failed";
        case Ev::Deliver: return "deliver";
        case Ev::Truncated: return "truncated";
        case Ev::Subscribed: return "subscribed";
    }
    return "?";
}

std::string to_string(const TraceEvent& e) {
    auto s = fmt::format("{:>12.3f}ms {:<12} n={} aux={} num={}", static_cast<double>(e.at_us) / 1000.0,
                         ev_name(e.type), e.node, e.aux, e.num);
    if (!e.topic.empty()) s += fmt::format(" topic={} key={}.{}", e.topic, e.key.epoch, e.key.seq);
    if (e.id.hi || e.id.lo) s += fmt::format(" id={:016x}{:016x}", e.id.hi, e.id.lo);
    if (e.payload_hash) s += fmt::format(" payload={:016x}", e.payload_hash);
    return s;
}

namespace {

void mix(std::uint64_t& h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= kFnvPrime;
    }
}

}  // namespace

void Trace::add(TraceEvent e) {
    mix(hash_, static_cast<std::uint64_t>(e.at_us));
    mix(hash_, static_cast<std::uint64_t>(e.type));
    mix(hash_, e.node);
    mix(hash_, e.aux);
    mix(hash_, e.num);
    mix(hash_, fnv1a64(e.topic));
    mix(hash_, e.key.epoch);
    mix(hash_, e.key.seq);
    mix(hash_, e.id.hi);
    mix(hash_, e.id.lo);
    mix(hash_, e.payload_hash);
    events_.push_back(std::move(e));
}

std::uint64_t payload_hash(const std::string& payload) { return fnv1a64(payload); }

}  // namespace migrant::simnet
