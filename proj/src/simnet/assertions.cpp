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

#include "migrant/simnet/assertions.hpp"

#include <deque>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace migrant::simnet {
namespace {

std::string key_str(OrderKey k) { return fmt::format("{}.{}", k.epoch, k.seq); }

std::int64_t us(rt::Duration d) { return std::chrono::duration_cast<std::chrono::microseconds>(d).count(); }

Check fail(std::string detail) { return Check{Verdict::Fail, std::move(detail)}; }

// Per subscriber and topic, delivered keys strictly increase; a key never carries two messages.
class TotalOrder final : public Assertion {
public:
    const char* name() const noexcept override { return "total_order"; }
    Check evaluate(std::span<const TraceEvent> trace, const AssertionContext&) const override {
        std::map<std::pair<std::uint32_t, std::string>, OrderKey> last;
        std::map<std::pair<std::string, OrderKey>, std::pair<MsgId, std::uint64_t>> content;
        for (const auto& e : trace) {
            if (e.type != Ev::Deliver && e.type != Ev::Assign) continue;
            auto [it, fresh] = content.try_emplace({e.topic, e.key}, e.id, e.payload_hash);
            if (!fresh && (it->second.first != e.id || it->second.second != e.payload_hash))
                return fail(fmt::format("topic {} key {} carries two different messages", e.topic, key_str(e.key)));
            if (e.type != Ev::Deliver) continue;
            auto& l = last[{e.node, e.topic}];
            if (e.key <= l)
                return fail(fmt::format("client {} topic {}: key {} delivered after {}", e.node, e.topic, key_str(e.key),
                                        key_str(l)));
            l = e.key;
        }
        return {};
    }
};

// Every acknowledged publication reaches every subscriber that was subscribed when it was
// published, exactly once at the application callback.
class AtLeastOnce final : public Assertion {
public:
    const char* name() const noexcept override { return "at_least_once"; }
    Check evaluate(std::span<const TraceEvent> trace, const AssertionContext&) const override {
        std::map<std::pair<std::uint32_t, std::string>, std::size_t> subscribed;
        std::set<std::pair<std::uint32_t, std::string>> truncated;
        std::map<MsgId, std::pair<std::string, std::size_t>> published;
        std::vector<MsgId> acked;
        std::map<std::pair<std::uint32_t, MsgId>, int> delivered;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const auto& e = trace[i];
            switch (e.type) {
                case Ev::Subscribed: subscribed.try_emplace({e.node, e.topic}, i); break;
                case Ev::Truncated: truncated.insert({e.node, e.topic}); break;
                case Ev::Publish: published.try_emplace(e.id, e.topic, i); break;
                case Ev::Acked: acked.push_back(e.id); break;
                case Ev::Deliver:
                    if (++delivered[{e.node, e.id}] > 1)
                        return fail(fmt::format("client {} received {:016x}{:016x} twice", e.node, e.id.hi, e.id.lo));
                    break;
                default: break;
            }
        }
        std::size_t missing = 0;
        std::string first;
        for (const auto& id : acked) {
            const auto& [topic, at] = published.at(id);
            for (const auto& [key, since] : subscribed) {
                if (key.second != topic || since > at || truncated.count(key)) continue;
                if (delivered.count({key.first, id})) continue;
                if (!missing++)
                    first = fmt::format("client {} lacks {:016x}{:016x} on {}", key.first, id.hi, id.lo, topic);
            }
        }
        if (missing) return {Verdict::Undecided, fmt::format("{} deliveries outstanding; {}", missing, first)};
        return {};
    }
};

// One winner per (group, epoch), and only that winner assigns keys in the epoch.
class CoordinatorUniqueness final : public Assertion {
public:
    const char* name() const noexcept override { return "coordinator_uniqueness"; }
    Check evaluate(std::span<const TraceEvent> trace, const AssertionContext&) const override {
        std::map<std::pair<std::uint32_t, std::uint64_t>, std::uint32_t> owner;
        for (const auto& e : trace) {
            if (e.type == Ev::Won) {
                auto [it, fresh] = owner.try_emplace({e.aux, e.num}, e.node);
                if (!fresh)
                    return fail(fmt::format("group {} epoch {} won by servers {} and {}", e.aux, e.num, it->second, e.node));
            } else if (e.type == Ev::Assign) {
                auto [it, fresh] = owner.try_emplace({e.aux, e.key.epoch}, e.node);
                if (!fresh && it->second != e.node)
                    return fail(fmt::format("group {} epoch {} sequenced by servers {} and {}", e.aux, e.key.epoch,
                                            it->second, e.node));
            }
        }
        return {};
    }
};

class EpochMonotonic final : public Assertion {
public:
    const char* name() const noexcept override { return "epoch_monotonic"; }
    Check evaluate(std::span<const TraceEvent> trace, const AssertionContext&) const override {
        std::map<std::uint32_t, std::uint64_t> last;
        for (const auto& e : trace) {
            if (e.type != Ev::Won) continue;
            auto [it, fresh] = last.try_emplace(e.aux, e.num);
            if (!fresh) {
                if (e.num <= it->second)
                    return fail(fmt::format("group {}: epoch {} won after epoch {}", e.aux, e.num, it->second));
                it->second = e.num;
            }
        }
        return {};
    }
};

// At every PUBACK the message is held by at least two server caches. A crashed or
// fenced server's cache does not count.
class TwoCopy final : public Assertion {
public:
    const char* name() const noexcept override { return "two_copy"; }
    Check evaluate(std::span<const TraceEvent> trace, const AssertionContext& ctx) const override {
        if (ctx.servers < 3) return {};
        struct Held {
            std::deque<OrderKey> order;
            std::set<OrderKey> keys;
        };
        std::map<std::pair<std::uint32_t, std::string>, Held> held;
        auto drop_server = [&](std::uint32_t node) {
            for (auto it = held.begin(); it != held.end();) {
                if (it->first.first == node) {
                    it = held.erase(it);
                } else {
                    ++it;
                }
            }
        };
        for (const auto& e : trace) {
            switch (e.type) {
                case Ev::Append: {
                    auto& h = held[{e.node, e.topic}];
                    if (!h.keys.insert(e.key).second) break;
                    h.order.push_back(e.key);
                    if (h.order.size() > ctx.cache_depth) {
                        h.keys.erase(h.order.front());
                        h.order.pop_front();
                    }
                    break;
                }
                case Ev::Crash:
                case Ev::Fence: drop_server(e.node); break;
                case Ev::PubAck: {
                    std::size_t copies = 0;
                    for (std::uint32_t s = 0; s < ctx.servers; ++s) {
                        auto it = held.find({s, e.topic});
                        copies += it != held.end() && it->second.keys.count(e.key);
                    }
                    if (copies < 2)
                        return fail(fmt::format("server {} acked {} {} held by {} server(s)", e.node, e.topic,
                                                key_str(e.key), copies));
                    break;
                }
                default: break;
            }
        }
        return {};
    }
};

// Servers cut off in a minority fence within the bound; no other server ever fences.
class Fencing final : public Assertion {
public:
    const char* name() const noexcept override { return "fencing"; }
    Check evaluate(std::span<const TraceEvent> trace, const AssertionContext& ctx) const override {
        struct Episode {
            std::int64_t start = 0;
            std::int64_t end = INT64_MAX;  // heal
            std::set<std::uint32_t> minority;
        };
        std::vector<Episode> episodes;
        std::map<std::uint32_t, std::vector<std::int64_t>> fences;
        std::map<std::uint32_t, std::vector<std::int64_t>> crashes;
        const std::size_t majority = ctx.servers / 2 + 1;
        for (const auto& e : trace) {
            if (e.type == Ev::Partition) {
                if (!episodes.empty() && episodes.back().end == INT64_MAX) episodes.back().end = e.at_us;
                Episode ep;
                ep.start = e.at_us;
                std::stringstream groups(e.topic);
                for (std::string g; std::getline(groups, g, '|');) {
                    std::set<std::uint32_t> members;
                    std::stringstream ms(g);
                    for (std::string m; std::getline(ms, m, ',');) members.insert(static_cast<std::uint32_t>(std::stoul(m)));
                    if (members.size() < majority) ep.minority.insert(members.begin(), members.end());
                }
                episodes.push_back(std::move(ep));
            } else if (e.type == Ev::Heal) {
                if (!episodes.empty() && episodes.back().end == INT64_MAX) episodes.back().end = e.at_us;
            } else if (e.type == Ev::Fence) {
                bool allowed = false;
                for (const auto& ep : episodes)
                    if (ep.minority.count(e.node) && e.at_us >= ep.start &&
                        (ep.end == INT64_MAX || e.at_us <= ep.end + us(ctx.fence_grace)))
                        allowed = true;
                if (!allowed) return fail(fmt::format("server {} fenced outside a minority partition", e.node));
                fences[e.node].push_back(e.at_us);
            } else if (e.type == Ev::Crash) {
                crashes[e.node].push_back(e.at_us);
            }
        }
        if (ctx.servers < 3) return {};
        for (const auto& ep : episodes) {
            const auto deadline = ep.start + us(ctx.fence_bound);
            if (ep.end <= deadline || ctx.now_us < deadline) continue;
            for (auto s : ep.minority) {
                auto in_window = [&](const std::vector<std::int64_t>& v) {
                    for (auto t : v)
                        if (t >= ep.start && t <= deadline) return true;
                    return false;
                };
                if (in_window(crashes[s]) || in_window(fences[s])) continue;
                return fail(fmt::format("server {} isolated at {}us did not fence by {}us", s, ep.start, deadline));
            }
        }
        return {};
    }
};

// Live servers hold the same keys per topic, up to the cache depth.
class CacheEquality final : public Assertion {
public:
    const char* name() const noexcept override { return "cache_equality"; }
    Check evaluate(std::span<const TraceEvent>, const AssertionContext& ctx) const override {
        if (!ctx.caches) return {Verdict::Undecided, "final state not available"};
        std::optional<CacheSnapshot> ref;
        std::size_t ref_server = 0;
        for (std::size_t i = 0; i < ctx.caches->size(); ++i) {
            const auto& c = (*ctx.caches)[i];
            if (!c) continue;
            CacheSnapshot trimmed;
            for (const auto& [topic, keys] : *c) {
                if (keys.empty()) continue;
                const auto from = keys.size() > ctx.cache_depth ? keys.size() - ctx.cache_depth : 0;
                trimmed[topic].assign(keys.begin() + static_cast<std::ptrdiff_t>(from), keys.end());
            }
            if (!ref) {
                ref = std::move(trimmed);
                ref_server = i;
                continue;
            }
            if (trimmed == *ref) continue;
            for (const auto& [topic, keys] : *ref) {
                auto it = trimmed.find(topic);
                const auto n = it == trimmed.end() ? 0 : it->second.size();
                if (n != keys.size() || it->second != keys)
                    return {Verdict::Undecided, fmt::format("servers {} and {} differ on {} ({} vs {} keys)", ref_server,
                                                            i, topic.str(), keys.size(), n)};
            }
            return {Verdict::Undecided, fmt::format("server {} holds topics server {} lacks", i, ref_server)};
        }
        return {};
    }
};

}  // namespace

const char* verdict_name(Verdict v) noexcept {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Undecided: return "undecided";
    }
    return "?";
}

const std::vector<std::string>& assertion_names() {
    static const std::vector<std::string> names{"total_order",     "at_least_once", "coordinator_uniqueness",
                                                "epoch_monotonic", "two_copy",      "fencing",
                                                "cache_equality"};
    return names;
}

bool known_assertion(const std::string& name) {
    for (const auto& n : assertion_names())
        if (n == name) return true;
    return false;
}

std::unique_ptr<Assertion> make_assertion(const std::string& name) {
    if (name == "total_order") return std::make_unique<TotalOrder>();
    if (name == "at_least_once") return std::make_unique<AtLeastOnce>();
    if (name == "coordinator_uniqueness") return std::make_unique<CoordinatorUniqueness>();
    if (name == "epoch_monotonic") return std::make_unique<EpochMonotonic>();
    if (name == "two_copy") return std::make_unique<TwoCopy>();
    if (name == "fencing") return std::make_unique<Fencing>();
    if (name == "cache_equality") return std::make_unique<CacheEquality>();
    throw InvalidArgument("unknown assertion '" + name + "'");
}

}  // namespace migrant::simnet
