// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pscal {

/// Flat `key = value` configuration with `#` comments.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    /// Throws ConfigError on a line without '=' or a duplicated key.
    static KeyValueConfig parse(const std::string& text);
    /// Throws IoError if the file cannot be read.
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma- or whitespace-separated list.
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    std::string to_string() const;
    void save(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a.
class Fnv1a {
public:
    void update(const void* data, std::size_t n);
    void update(const std::string& s) { update(s.data(), s.size()); }
    std::uint64_t digest() const { return h_; }
    std::string hex() const;

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hash_file(const std::filesystem::path& path);

}  // namespace pscal
