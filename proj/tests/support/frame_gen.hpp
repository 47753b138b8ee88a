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

#include <random>
#include <string>

#include "migrant/wire/frame.hpp"

namespace migrant::testing {

/// Random frame generator covering every kind and field.
class FrameGen {
public:
    explicit FrameGen(std::uint64_t seed) : rng_(seed) {}

    wire::Frame make(wire::Kind kind) {
        using namespace wire;
        switch (kind) {
            case Kind::Connect: return Connect{static_cast<Role>(pick(0, 1)), ServerId{u32()}, text(0, 20)};
            case Kind::ConnAck: return ConnAck{ServerId{u32()}, static_cast<ConnStatus>(pick(0, 1))};
            case Kind::Subscribe: return Subscribe{topic(), pick(0, 1) == 1, key()};
            case Kind::SubAck: return SubAck{topic(), key()};
            case Kind::Publish: return Publish{topic(), id(), pick(0, 1) == 1, bytes(0, 300)};
            case Kind::PubAck: return PubAck{id()};
            case Kind::PubNack: return PubNack{id(), static_cast<NackReason>(pick(1, 4)), ServerId{u32()}};
            case Kind::Notify: return Notify{message()};
            case Kind::Recover: return Recover{message()};
            case Kind::RecoverEnd: return RecoverEnd{topic(), pick(0, 1) == 1};
            case Kind::Ping: return Ping{};
            case Kind::Pong: return Pong{};
            case Kind::Replicate: return Replicate{message()};
            case Kind::ReplAck: return ReplAck{topic(), key()};
            case Kind::CoordGossip: return CoordGossip{GroupId{u32()}, ServerId{u32()}, u64()};
            case Kind::ReconcileReq: {
                ReconcileReq r{u64(), u32(), {}};
                for (int n = pick(0, 4); n > 0; --n) r.known.push_back({topic(), key()});
                return r;
            }
            case Kind::ReconcileRsp: {
                ReconcileRsp r;
                r.request_id = u64();
                r.group = u32();
                r.last_chunk = pick(0, 1) == 1;
                for (int n = pick(0, 4); n > 0; --n) r.messages.push_back(message());
                for (int n = pick(0, 3); n > 0; --n) r.heads.push_back({topic(), key()});
                for (int n = pick(0, 2); n > 0; --n) r.truncated.push_back({topic(), key()});
                return r;
            }
            case Kind::Close: return Close{static_cast<CloseReason>(pick(0, 6)), text(0, 30)};
            case Kind::Kv: return Kv{bytes(0, 200)};
        }
        return Ping{};
    }

    wire::Frame any() { return make(static_cast<wire::Kind>(pick(wire::kMinKind, wire::kMaxKind))); }

    Message message() { return Message{topic(), key(), bytes(0, 300), id()}; }

    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::uint32_t u32() { return std::uniform_int_distribution<std::uint32_t>()(rng_); }
    std::uint64_t u64() { return std::uniform_int_distribution<std::uint64_t>()(rng_); }
    MsgId id() { return MsgId{u64(), u64()}; }
    OrderKey key() { return OrderKey{u64(), u64()}; }

    std::string text(int lo, int hi) {
        std::string s;
        for (int n = pick(lo, hi); n > 0; --n) s.push_back(static_cast<char>(pick('!', '~')));
        return s;
    }
    std::string bytes(int lo, int hi) {
        std::string s;
        for (int n = pick(lo, hi); n > 0; --n) s.push_back(static_cast<char>(pick(0, 255)));
        return s;
    }
    TopicName topic() { return TopicName(text(1, 40)); }

private:
    std::mt19937_64 rng_;
};

}  // namespace migrant::testing
