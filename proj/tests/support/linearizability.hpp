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
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace migrant::testing {

/// One operation of a concurrent history. `ret` is empty for operations whose
/// caller never saw a response; those may or may not have taken effect.
template <class Op, class Res>
struct HistoryOp {
    std::uint64_t invoke = 0;
    std::optional<std::uint64_t> ret;
    Op op;
    Res res{};
};

/// Wing & Gong search with memoization on (linearized set, model state).
/// `step(model, op, res)` applies `op` to `model` and returns false if the sequential
/// result differs from `*res`; `res` is null for pending operations.
/// `key(model)` returns a canonical encoding of the model state.
template <class Model, class Op, class Res>
class LinearizabilityChecker {
public:
    using Step = std::function<bool(Model&, const Op&, const Res*)>;
    using Key = std::function<std::string(const Model&)>;

    LinearizabilityChecker(Step step, Key key) : step_(std::move(step)), key_(std::move(key)) {}

    bool check(const std::vector<HistoryOp<Op, Res>>& history, const Model& initial) {
        history_ = &history;
        memo_.clear();
        std::vector<bool> done(history.size(), false);
        return search(done, initial);
    }

private:
    bool search(std::vector<bool>& done, const Model& model) {
        const auto& h = *history_;
        std::uint64_t min_ret = std::numeric_limits<std::uint64_t>::max();
        bool complete = true;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (done[i] || !h[i].ret) continue;
            complete = false;
            min_ret = std::min(min_ret, *h[i].ret);
        }
        if (complete) return true;
        std::string memo_key(done.begin(), done.end());
        memo_key += '|';
        memo_key += key_(model);
        if (memo_.count(memo_key)) return false;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (done[i] || h[i].invoke > min_ret) continue;
            Model next = model;
            if (!step_(next, h[i].op, h[i].ret ? &h[i].res : nullptr)) continue;
            done[i] = true;
            if (search(done, next)) return true;
            done[i] = false;
        }
        memo_.insert(std::move(memo_key));
        return false;
    }

    Step step_;
    Key key_;
    const std::vector<HistoryOp<Op, Res>>* history_ = nullptr;
    std::unordered_set<std::string> memo_;
};

}  // namespace migrant::testing
