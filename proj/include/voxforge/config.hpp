// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace voxforge {

/// Plain-text `key=value` settings. Blank lines and `#` comments are ignored.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace voxforge
