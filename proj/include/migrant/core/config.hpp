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

#include <chrono>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace migrant {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses "250ms", "2s", "1.5s", "13min", "1h" or "40us". A bare number is milliseconds.
std::chrono::nanoseconds parse_duration(const std::string& text);
std::string format_duration(std::chrono::nanoseconds d);

/// Splits on whitespace.
std::vector<std::string> split_words(const std::string& line);
std::string trim(const std::string& s);

/// One "key = value" (or "key value") line of a config file.
struct ConfigLine {
    std::size_t line = 0;
    std::string key;
    std::string value;
};

/// Reads lines of "key = value"; '#' starts a comment; blank lines are skipped.
/// Repeated keys are kept in order.
std::vector<ConfigLine> parse_config_lines(const std::string& text);

/// Key/value view with typed getters. Every getter marks the key as used.
class KeyValueConfig {
public:
    explicit KeyValueConfig(const std::string& text);
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::chrono::nanoseconds get_duration(const std::string& key, std::chrono::nanoseconds def) const;
    /// Keys never read by a getter.
    std::vector<std::string> unused() const;

private:
    std::map<std::string, ConfigLine> values_;
    mutable std::map<std::string, bool> used_;
};

}  // namespace migrant
