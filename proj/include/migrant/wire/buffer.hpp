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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "migrant/wire/codec.hpp"

namespace migrant::wire {

/// Big-endian field writer shared by the frame codec and internal protocols.
class Writer {
public:
    explicit Writer(Bytes& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void u64(std::uint64_t v) {
        for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void str(std::string_view s) {
        if (s.size() > 0xFFFF) throw OversizeFrame("string field exceeds 65535 bytes");
        u16(static_cast<std::uint16_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void blob(std::string_view s) {
        if (s.size() > kMaxLengthField) throw OversizeFrame("bytes field exceeds frame limit");
        u32(static_cast<std::uint32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void key(OrderKey k) {
        u64(k.epoch);
        u64(k.seq);
    }
    void id(MsgId m) {
        u64(m.hi);
        u64(m.lo);
    }
    void message(const Message& m) {
        if (m.payload.size() > Message::kMaxPayload) throw OversizeFrame("payload exceeds 65535 bytes");
        str(m.topic.str());
        key(m.key);
        id(m.publisher_msg_id);
        blob(m.payload);
    }
    void topic_keys(const std::vector<TopicKey>& v) {
        if (v.size() > 0xFFFFFFFFu) throw OversizeFrame("too many entries");
        u32(static_cast<std::uint32_t>(v.size()));
        for (const auto& tk : v) {
            str(tk.topic.str());
            key(tk.key);
        }
    }

private:
    Bytes& out_;
};

/// Bounds-checked reader; every failure throws MalformedFrame.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw MalformedFrame("truncated frame body");
    }
    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    std::string str() {
        auto n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::string blob() {
        auto n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    TopicName topic() {
        auto s = str();
        if (!TopicName::valid(s)) throw MalformedFrame("invalid topic name");
        return TopicName(std::move(s));
    }
    OrderKey key() {
        OrderKey k;
        k.epoch = u64();
        k.seq = u64();
        return k;
    }
    MsgId id() {
        MsgId m;
        m.hi = u64();
        m.lo = u64();
        return m;
    }
    bool flag() {
        auto v = u8();
        if (v > 1) throw MalformedFrame("invalid boolean");
        return v == 1;
    }
    Message message() {
        Message m;
        m.topic = topic();
        m.key = key();
        m.publisher_msg_id = id();
        m.payload = blob();
        if (m.payload.size() > Message::kMaxPayload) throw MalformedFrame("payload exceeds 65535 bytes");
        return m;
    }
    std::vector<TopicKey> topic_keys() {
        auto n = u32();
        // Each entry takes at least 18 bytes; reject counts the body cannot hold.
        if (n > (in_.size() - pos_) / 18) throw MalformedFrame("entry count exceeds body");
        std::vector<TopicKey> v;
        v.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            TopicKey tk;
            tk.topic = topic();
            tk.key = key();
            v.push_back(std::move(tk));
        }
        return v;
    }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    void finish() const {
        if (pos_ != in_.size()) throw MalformedFrame("trailing bytes in frame body");
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace migrant::wire
