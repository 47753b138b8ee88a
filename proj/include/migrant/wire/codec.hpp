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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "migrant/wire/frame.hpp"

namespace migrant::wire {

/// Upper bound on one encoded frame, length prefix included.
inline constexpr std::size_t kMaxFrameBytes = 1u << 20;
inline constexpr std::size_t kLengthPrefixBytes = 4;
inline constexpr std::size_t kMaxLengthField = kMaxFrameBytes - kLengthPrefixBytes;

class OversizeFrame : public std::length_error {
public:
    using std::length_error::length_error;
};

/// The peer sent bytes that do not form a valid frame; the connection must be closed.
class MalformedFrame : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Encodes `f` as: u32 big-endian length (= 1 + body size) | u8 kind | body.
Bytes encode_frame(const Frame& f);

/// Appends the encoding of `f` to `out`. On OversizeFrame `out` is left unchanged.
void encode_frame_into(const Frame& f, Bytes& out);

/// Decodes exactly one frame from a buffer holding `kind | body` (no length prefix).
Frame decode_body(std::span<const std::uint8_t> kind_and_body);

/// Per-connection accumulator for incremental decoding of partial reads.
class DecodeBuffer {
public:
    /// Appends `incoming` and returns every frame completed by it, in arrival order.
    /// Throws MalformedFrame; the buffer is unusable afterwards.
    std::vector<Frame> decode_frames(std::span<const std::uint8_t> incoming);

    std::size_t pending_bytes() const noexcept { return pending_.size() - consumed_; }

private:
    Bytes pending_;
    std::size_t consumed_ = 0;
};

}  // namespace migrant::wire
