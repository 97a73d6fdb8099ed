// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxforge/config.hpp"

#include <fstream>
#include <sstream>

#include "voxforge/common.hpp"

namespace voxforge {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail_usage("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail_usage("config line " + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_usage("cannot read config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        fail_usage("config key " + key + ": not a number: " + it->second);
    }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        long long v = std::stoll(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        fail_usage("config key " + key + ": not an integer: " + it->second);
    }
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

}  // namespace voxforge
