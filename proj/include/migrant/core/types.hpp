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

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace migrant {

using Bytes = std::vector<std::uint8_t>;

/// Raised when a domain value is constructed from input that violates its invariants.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A validated topic identifier: non-empty, at most 255 bytes, no control characters.
class TopicName {
public:
    static constexpr std::size_t kMaxBytes = 255;

    TopicName() = default;
    explicit TopicName(std::string name);

    /// Returns true when `name` would be accepted by the constructor.
    static bool valid(std::string_view name) noexcept;

    const std::string& str() const noexcept { return name_; }
    bool empty() const noexcept { return name_.empty(); }

    friend auto operator<=>(const TopicName&, const TopicName&) = default;
    friend bool operator==(const TopicName&, const TopicName&) = default;

private:
    std::string name_;
};

std::ostream& operator<<(std::ostream& os, const TopicName& t);

/// Index of a topic group; the unit of coordinator assignment and cache lock sharding.
struct GroupId {
    std::uint32_t index = 0;

    friend auto operator<=>(const GroupId&, const GroupId&) = default;
};

/// Cluster member identifier.
struct ServerId {
    std::uint32_t id = 0;

    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    friend auto operator<=>(const ServerId&, const ServerId&) = default;
};

std::ostream& operator<<(std::ostream& os, ServerId s);

/// (epoch, seq) pair. Ordered lexicographically. Both components start at 1;
/// (0,0) is reserved for "nothing received yet".
struct OrderKey {
    std::uint64_t epoch = 0;
    std::uint64_t seq = 0;

    static constexpr OrderKey none() noexcept { return {0, 0}; }
    constexpr bool is_none() const noexcept { return epoch == 0 && seq == 0; }

    friend constexpr auto operator<=>(const OrderKey&, const OrderKey&) = default;
};

std::ostream& operator<<(std::ostream& os, OrderKey k);

enum class Ordering { Less, Equal, Greater };

Ordering compare(OrderKey a, OrderKey b) noexcept;

/// 128-bit publisher-chosen message identifier.
struct MsgId {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    template <class Rng>
    static MsgId random(Rng& rng) {
        std::uniform_int_distribution<std::uint64_t> dist;
        return MsgId{dist(rng), dist(rng)};
    }

    friend auto operator<=>(const MsgId&, const MsgId&) = default;
};

std::ostream& operator<<(std::ostream& os, MsgId id);

/// A published payload, sequenced by its topic's coordinator.
struct Message {
    static constexpr std::size_t kMaxPayload = 65535;

    TopicName topic;
    OrderKey key;
    std::string payload;
    MsgId publisher_msg_id;

    friend bool operator==(const Message&, const Message&) = default;
};

}  // namespace migrant

template <>
struct std::hash<migrant::TopicName> {
    std::size_t operator()(const migrant::TopicName& t) const noexcept {
        return std::hash<std::string>{}(t.str());
    }
};

template <>
struct std::hash<migrant::MsgId> {
    std::size_t operator()(const migrant::MsgId& m) const noexcept {
        return static_cast<std::size_t>(m.hi * 0x9e3779b97f4a7c15ULL ^ m.lo);
    }
};

template <>
struct std::hash<migrant::ServerId> {
    std::size_t operator()(migrant::ServerId s) const noexcept { return s.id; }
};
