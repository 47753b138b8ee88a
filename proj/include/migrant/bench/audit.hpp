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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "migrant/core/types.hpp"

namespace migrant::bench {

/// One Benchpub publication.
struct PublishRecord {
    std::string topic;
    MsgId id;
    std::int64_t sent_ns = 0;  // first attempt, the timestamp in the payload
    bool acked = false;
};

/// Line format: "<topic> <id hi hex> <id lo hex> <sent_ns> <0|1>".
void write_publish_log(const std::string& path, const std::vector<PublishRecord>& records);
/// Throws std::runtime_error on unreadable or malformed input.
std::vector<PublishRecord> read_publish_log(const std::string& path);

struct Delivery {
    MsgId id;
    OrderKey key;
};

/// What one Benchsub connection saw on its topic.
struct SubscriberLog {
    std::string topic;
    /// When the first SUBACK arrived; nothing is expected before it.
    std::optional<std::int64_t> subscribed_ns;
    std::vector<Delivery> deliveries;
};

struct AuditResult {
    std::uint64_t subscribers = 0;
    std::uint64_t expected = 0;
    std::uint64_t missing = 0;
    std::uint64_t out_of_order = 0;
    std::uint64_t duplicates = 0;
    /// (topic, key) delivered with two different ids.
    std::uint64_t inconsistent = 0;

    bool ok() const { return missing == 0 && out_of_order == 0 && duplicates == 0 && inconsistent == 0; }
};

/// Every acknowledged publication sent after a subscriber's SUBACK and not after
/// `cutoff_ns` must reach that subscriber, once, in key order.
AuditResult audit(const std::vector<PublishRecord>& pubs, const std::vector<SubscriberLog>& subs,
                  std::int64_t cutoff_ns = std::numeric_limits<std::int64_t>::max());

}  // namespace migrant::bench
