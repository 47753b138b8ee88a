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

#include "migrant/core/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace migrant {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split_words(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::chrono::nanoseconds parse_duration(const std::string& text) {
    const auto t = trim(text);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(t, &used);
    } catch (const std::logic_error&) {
        throw ConfigError("bad duration '" + text + "'");
    }
    const auto unit = t.substr(used);
    double ns_per = 0;
    if (unit.empty() || unit == "ms") {
        ns_per = 1e6;
    } else if (unit == "us") {
        ns_per = 1e3;
    } else if (unit == "ns") {
        ns_per = 1;
    } else if (unit == "s") {
        ns_per = 1e9;
    } else if (unit == "min" || unit == "m") {
        ns_per = 60e9;
    } else if (unit == "h") {
        ns_per = 3600e9;
    } else {
        throw ConfigError("bad duration unit in '" + text + "'");
    }
    if (v < 0 || !std::isfinite(v)) throw ConfigError("bad duration '" + text + "'");
    return std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(v * ns_per)));
}

std::string format_duration(std::chrono::nanoseconds d) {
    const auto ns = d.count();
    if (ns % 1'000'000'000 == 0) return std::to_string(ns / 1'000'000'000) + "s";
    if (ns % 1'000'000 == 0) return std::to_string(ns / 1'000'000) + "ms";
    if (ns % 1'000 == 0) return std::to_string(ns / 1'000) + "us";
    return std::to_string(ns) + "ns";
}

std::vector<ConfigLine> parse_config_lines(const std::string& text) {
    std::vector<ConfigLine> out;
    std::istringstream in(text);
    std::string raw;
    for (std::size_t n = 1; std::getline(in, raw); ++n) {
        auto line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        ConfigLine l;
        l.line = n;
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
            l.key = trim(line.substr(0, eq));
            l.value = trim(line.substr(eq + 1));
        } else {
            const auto sp = line.find_first_of(" \t");
            l.key = line.substr(0, sp);
            l.value = sp == std::string::npos ? "" : trim(line.substr(sp));
        }
        if (l.key.empty()) throw ConfigError("line " + std::to_string(n) + ": missing key");
        out.push_back(std::move(l));
    }
    return out;
}

KeyValueConfig::KeyValueConfig(const std::string& text) {
    for (auto& l : parse_config_lines(text)) {
        if (values_.count(l.key)) throw ConfigError("line " + std::to_string(l.line) + ": duplicate key '" + l.key + "'");
        values_[l.key] = std::move(l);
    }
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return KeyValueConfig(ss.str());
}

std::string KeyValueConfig::get(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    used_[key] = true;
    return it->second.value;
}

namespace {

[[noreturn]] void bad(const ConfigLine& l, const char* what) {
    throw ConfigError("line " + std::to_string(l.line) + ": " + l.key + ": expected " + what + ", got '" + l.value + "'");
}

}  // namespace

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    used_[key] = true;
    try {
        std::size_t used = 0;
        if (!it->second.value.empty() && it->second.value[0] == '-') bad(it->second, "an unsigned integer");
        auto v = std::stoull(it->second.value, &used);
        if (used != it->second.value.size()) bad(it->second, "an unsigned integer");
        return v;
    } catch (const std::logic_error&) {
        bad(it->second, "an unsigned integer");
    }
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    used_[key] = true;
    try {
        std::size_t used = 0;
        auto v = std::stod(it->second.value, &used);
        if (used != it->second.value.size()) bad(it->second, "a number");
        return v;
    } catch (const std::logic_error&) {
        bad(it->second, "a number");
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    used_[key] = true;
    const auto& v = it->second.value;
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    bad(it->second, "a boolean");
}

std::chrono::nanoseconds KeyValueConfig::get_duration(const std::string& key, std::chrono::nanoseconds def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    used_[key] = true;
    try {
        return parse_duration(it->second.value);
    } catch (const ConfigError&) {
        bad(it->second, "a duration");
    }
}

std::vector<std::string> KeyValueConfig::unused() const {
    std::vector<std::string> out;
    for (const auto& [k, l] : values_)
        if (!used_.count(k)) out.push_back(k);
    return out;
}

}  // namespace migrant
