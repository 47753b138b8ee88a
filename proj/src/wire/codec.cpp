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

#include "migrant/wire/codec.hpp"

#include <cstring>
#include <string_view>

#include "migrant/wire/buffer.hpp"

namespace migrant::wire {

namespace {

struct BodyEncoder {
    Writer& w;

    void operator()(const Connect& f) {
        w.u8(static_cast<std::uint8_t>(f.role));
        w.u32(f.server.id);
        w.str(f.client_name);
    }
    void operator()(const ConnAck& f) {
        w.u32(f.server.id);
        w.u8(static_cast<std::uint8_t>(f.status));
    }
    void operator()(const Subscribe& f) {
        w.str(f.topic.str());
        w.u8(f.recover ? Subscribe::kRecover : 0);
        w.key(f.resume);
    }
    void operator()(const SubAck& f) {
        w.str(f.topic.str());
        w.key(f.head);
    }
    void operator()(const Publish& f) {
        if (f.payload.size() > Message::kMaxPayload) throw OversizeFrame("payload exceeds 65535 bytes");
        w.str(f.topic.str());
        w.id(f.msg_id);
        w.u8(f.ack_requested ? Publish::kAckRequested : 0);
        w.blob(f.payload);
    }
    void operator()(const PubAck& f) { w.id(f.msg_id); }
    void operator()(const PubNack& f) {
        w.id(f.msg_id);
        w.u8(static_cast<std::uint8_t>(f.reason));
        w.u32(f.coordinator_hint.id);
    }
    void operator()(const Notify& f) { w.message(f.message); }
    void operator()(const Recover& f) { w.message(f.message); }
    void operator()(const RecoverEnd& f) {
        w.str(f.topic.str());
        w.u8(f.truncated ? 1 : 0);
    }
    void operator()(const Ping&) {}
    void operator()(const Pong&) {}
    void operator()(const Replicate& f) { w.message(f.message); }
    void operator()(const ReplAck& f) {
        w.str(f.topic.str());
        w.key(f.key);
    }
    void operator()(const CoordGossip& f) {
        w.u32(f.group.index);
        w.u32(f.coordinator.id);
        w.u64(f.epoch);
    }
    void operator()(const ReconcileReq& f) {
        w.u64(f.request_id);
        w.u32(f.group);
        w.topic_keys(f.known);
    }
    void operator()(const ReconcileRsp& f) {
        w.u64(f.request_id);
        w.u32(f.group);
        w.u8(f.last_chunk ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(f.messages.size()));
        for (const auto& m : f.messages) w.message(m);
        w.topic_keys(f.heads);
        w.topic_keys(f.truncated);
    }
    void operator()(const Close& f) {
        w.u8(static_cast<std::uint8_t>(f.reason));
        w.str(f.detail);
    }
    void operator()(const Kv& f) { w.blob(f.body); }
};

Frame decode_typed(Kind kind, Reader& r) {
    switch (kind) {
        case Kind::Connect: {
            Connect f;
            auto role = r.u8();
            if (role > 1) throw MalformedFrame("invalid role");
            f.role = static_cast<Role>(role);
            f.server = ServerId{r.u32()};
            f.client_name = r.str();
            return f;
        }
        case Kind::ConnAck: {
            ConnAck f;
            f.server = ServerId{r.u32()};
            auto status = r.u8();
            if (status > 1) throw MalformedFrame("invalid connack status");
            f.status = static_cast<ConnStatus>(status);
            return f;
        }
        case Kind::Subscribe: {
            Subscribe f;
            f.topic = r.topic();
            auto flags = r.u8();
            if (flags & ~Subscribe::kRecover) throw MalformedFrame("unknown subscribe flags");
            f.recover = (flags & Subscribe::kRecover) != 0;
            f.resume = r.key();
            return f;
        }
        case Kind::SubAck: {
            SubAck f;
            f.topic = r.topic();
            f.head = r.key();
            return f;
        }
        case Kind::Publish: {
            Publish f;
            f.topic = r.topic();
            f.msg_id = r.id();
            auto flags = r.u8();
            if (flags & ~Publish::kAckRequested) throw MalformedFrame("unknown publish flags");
            f.ack_requested = (flags & Publish::kAckRequested) != 0;
            f.payload = r.blob();
            if (f.payload.size() > Message::kMaxPayload) throw MalformedFrame("payload exceeds 65535 bytes");
            return f;
        }
        case Kind::PubAck:
            return PubAck{r.id()};
        case Kind::PubNack: {
            PubNack f;
            f.msg_id = r.id();
            auto reason = r.u8();
            if (reason < 1 || reason > 4) throw MalformedFrame("invalid nack reason");
            f.reason = static_cast<NackReason>(reason);
            f.coordinator_hint = ServerId{r.u32()};
            return f;
        }
        case Kind::Notify:
            return Notify{r.message()};
        case Kind::Recover:
            return Recover{r.message()};
        case Kind::RecoverEnd: {
            RecoverEnd f;
            f.topic = r.topic();
            f.truncated = r.flag();
            return f;
        }
        case Kind::Ping:
            return Ping{};
        case Kind::Pong:
            return Pong{};
        case Kind::Replicate:
            return Replicate{r.message()};
        case Kind::ReplAck: {
            ReplAck f;
            f.topic = r.topic();
            f.key = r.key();
            return f;
        }
        case Kind::CoordGossip: {
            CoordGossip f;
            f.group = GroupId{r.u32()};
            f.coordinator = ServerId{r.u32()};
            f.epoch = r.u64();
            return f;
        }
        case Kind::ReconcileReq: {
            ReconcileReq f;
            f.request_id = r.u64();
            f.group = r.u32();
            f.known = r.topic_keys();
            return f;
        }
        case Kind::ReconcileRsp: {
            ReconcileRsp f;
            f.request_id = r.u64();
            f.group = r.u32();
            f.last_chunk = r.flag();
            auto n = r.u32();
            // A message takes at least 2 + 16 + 16 + 4 bytes.
            r.need(static_cast<std::size_t>(n) * 38);
            f.messages.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i) f.messages.push_back(r.message());
            f.heads = r.topic_keys();
            f.truncated = r.topic_keys();
            return f;
        }
        case Kind::Close: {
            Close f;
            auto reason = r.u8();
            if (reason > 6) throw MalformedFrame("invalid close reason");
            f.reason = static_cast<CloseReason>(reason);
            f.detail = r.str();
            return f;
        }
        case Kind::Kv:
            return Kv{r.blob()};
    }
    throw MalformedFrame("unknown frame kind");
}

}  // namespace

const char* kind_name(Kind k) noexcept {
    switch (k) {
        case Kind::Connect: return "CONNECT";
        case Kind::ConnAck: return "CONNACK";
        case Kind::Subscribe: return "SUBSCRIBE";
        case Kind::SubAck: return "SUBACK";
        case Kind::Publish: return "PUBLISH";
        case Kind::PubAck: return "PUBACK";
        case Kind::PubNack: return "PUBNACK";
        case Kind::Notify: return "NOTIFY";
        case Kind::Recover: return "RECOVER";
        case Kind::RecoverEnd: return "RECOVER_END";
        case Kind::Ping: return "PING";
        case Kind::Pong: return "PONG";
        case Kind::Replicate: return "REPLICATE";
        case Kind::ReplAck: return "REPL_ACK";
        case Kind::CoordGossip: return "COORD_GOSSIP";
        case Kind::ReconcileReq: return "RECONCILE_REQ";
        case Kind::ReconcileRsp: return "RECONCILE_RSP";
        case Kind::Close: return "CLOSE";
        case Kind::Kv: return "KV";
    }
    return "?";
}

Kind kind_of(const Frame& f) noexcept { return static_cast<Kind>(f.index() + 1); }

void encode_frame_into(const Frame& f, Bytes& out) {
    const auto start = out.size();
    try {
        Writer w(out);
        w.u32(0);
        w.u8(static_cast<std::uint8_t>(kind_of(f)));
        std::visit(BodyEncoder{w}, f);
        const auto length = out.size() - start - kLengthPrefixBytes;
        if (length > kMaxLengthField) throw OversizeFrame("frame exceeds 1 MiB");
        for (int i = 0; i < 4; ++i) out[start + i] = static_cast<std::uint8_t>(length >> (24 - 8 * i));
    } catch (...) {
        out.resize(start);
        throw;
    }
}

Bytes encode_frame(const Frame& f) {
    Bytes out;
    encode_frame_into(f, out);
    return out;
}

Frame decode_body(std::span<const std::uint8_t> kind_and_body) {
    if (kind_and_body.empty()) throw MalformedFrame("empty frame");
    auto kind = kind_and_body[0];
    if (kind < kMinKind || kind > kMaxKind) throw MalformedFrame("unknown frame kind");
    Reader r(kind_and_body.subspan(1));
    Frame f = decode_typed(static_cast<Kind>(kind), r);
    r.finish();
    return f;
}

std::vector<Frame> DecodeBuffer::decode_frames(std::span<const std::uint8_t> incoming) {
    std::vector<Frame> frames;
    pending_.insert(pending_.end(), incoming.begin(), incoming.end());
    for (;;) {
        const auto avail = pending_.size() - consumed_;
        if (avail < kLengthPrefixBytes) break;
        const auto* p = pending_.data() + consumed_;
        const std::uint32_t length = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                                     (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
        if (length == 0 || length > kMaxLengthField) throw MalformedFrame("invalid length prefix");
        if (avail - kLengthPrefixBytes < length) break;
        frames.push_back(decode_body({p + kLengthPrefixBytes, length}));
        consumed_ += kLengthPrefixBytes + length;
    }
    if (consumed_ == pending_.size()) {
        pending_.clear();
        consumed_ = 0;
    } else if (consumed_ > 4096 && consumed_ * 2 > pending_.size()) {
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(consumed_));
        consumed_ = 0;
    }
    return frames;
}

}  // namespace migrant::wire
