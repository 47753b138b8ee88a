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

#include "migrant/coordkv/protocol.hpp"

#include "migrant/wire/buffer.hpp"

namespace migrant::coordkv::proto {

namespace {

using wire::MalformedFrame;
using wire::Reader;
using wire::Writer;

void put_session(Writer& w, SessionId s) {
    w.u32(s.owner);
    w.u64(s.nonce);
}

SessionId get_session(Reader& r) {
    SessionId s;
    s.owner = r.u32();
    s.nonce = r.u64();
    return s;
}

void put_command(Writer& w, const Command& c) {
    w.u32(c.origin);
    w.u64(c.incarnation);
    w.u64(c.req_id);
    w.u8(static_cast<std::uint8_t>(c.op.index()));
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, OpenSession> || std::is_same_v<T, ExpireSession>) {
                put_session(w, op.session);
            } else if constexpr (std::is_same_v<T, CreateEphemeral>) {
                w.str(op.key);
                w.blob(op.value);
                put_session(w, op.session);
            } else if constexpr (std::is_same_v<T, DeleteEphemeral>) {
                w.str(op.key);
                put_session(w, op.session);
            } else if constexpr (std::is_same_v<T, CasCounter>) {
                w.str(op.key);
                w.u64(op.expected);
                w.u64(op.desired);
            }
        },
        c.op);
}

Command get_command(Reader& r) {
    Command c;
    c.origin = r.u32();
    c.incarnation = r.u64();
    c.req_id = r.u64();
    switch (r.u8()) {
        case 0: c.op = Noop{}; break;
        case 1: c.op = OpenSession{get_session(r)}; break;
        case 2: {
            CreateEphemeral op;
            op.key = r.str();
            op.value = r.blob();
            op.session = get_session(r);
            c.op = std::move(op);
            break;
        }
        case 3: {
            DeleteEphemeral op;
            op.key = r.str();
            op.session = get_session(r);
            c.op = std::move(op);
            break;
        }
        case 4: {
            CasCounter op;
            op.key = r.str();
            op.expected = r.u64();
            op.desired = r.u64();
            c.op = std::move(op);
            break;
        }
        case 5: c.op = ExpireSession{get_session(r)}; break;
        default: throw MalformedFrame("unknown kv op");
    }
    return c;
}

}  // namespace

Bytes encode(const Message& m) {
    Bytes out;
    Writer w(out);
    w.u8(static_cast<std::uint8_t>(m.index()));
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, VoteRequest>) {
                w.u64(v.term);
                w.u8(v.pre);
                w.u64(v.last_index);
                w.u64(v.last_term);
            } else if constexpr (std::is_same_v<T, VoteReply>) {
                w.u64(v.term);
                w.u8(v.pre);
                w.u8(v.granted);
            } else if constexpr (std::is_same_v<T, AppendRequest>) {
                w.u64(v.term);
                w.u64(v.prev_index);
                w.u64(v.prev_term);
                w.u64(v.commit);
                w.u32(static_cast<std::uint32_t>(v.entries.size()));
                for (const auto& e : v.entries) {
                    w.u64(e.term);
                    put_command(w, e.cmd);
                }
            } else if constexpr (std::is_same_v<T, AppendReply>) {
                w.u64(v.term);
                w.u8(v.success);
                w.u64(v.match_index);
            } else if constexpr (std::is_same_v<T, Forward>) {
                put_command(w, v.cmd);
            } else if constexpr (std::is_same_v<T, KeepAlive>) {
                put_session(w, v.session);
                w.u64(v.seq);
            } else if constexpr (std::is_same_v<T, KeepAliveReply>) {
                put_session(w, v.session);
                w.u64(v.seq);
                w.u8(v.live);
            }
        },
        m);
    return out;
}

Message decode(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    Message m;
    switch (r.u8()) {
        case 0: {
            VoteRequest v;
            v.term = r.u64();
            v.pre = r.flag();
            v.last_index = r.u64();
            v.last_term = r.u64();
            m = v;
            break;
        }
        case 1: {
            VoteReply v;
            v.term = r.u64();
            v.pre = r.flag();
            v.granted = r.flag();
            m = v;
            break;
        }
        case 2: {
            AppendRequest v;
            v.term = r.u64();
            v.prev_index = r.u64();
            v.prev_term = r.u64();
            v.commit = r.u64();
            auto n = r.u32();
            if (n > r.remaining() / 29) throw MalformedFrame("entry count exceeds body");
            v.entries.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i) {
                LogEntry e;
                e.term = r.u64();
                e.cmd = get_command(r);
                v.entries.push_back(std::move(e));
            }
            m = std::move(v);
            break;
        }
        case 3: {
            AppendReply v;
            v.term = r.u64();
            v.success = r.flag();
            v.match_index = r.u64();
            m = v;
            break;
        }
        case 4: m = Forward{get_command(r)}; break;
        case 5: {
            KeepAlive v;
            v.session = get_session(r);
            v.seq = r.u64();
            m = v;
            break;
        }
        case 6: {
            KeepAliveReply v;
            v.session = get_session(r);
            v.seq = r.u64();
            v.live = r.flag();
            m = v;
            break;
        }
        default: throw MalformedFrame("unknown kv message");
    }
    r.finish();
    return m;
}

}  // namespace migrant::coordkv::proto
