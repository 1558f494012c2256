#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dar {

// Flat key/value configuration. Files use `[section]` headers and
// `key = value` lines; a key inside a section is stored as "section.key".
// `#` starts a comment. Later assignments override earlier ones.
class RunConfig {
public:
    static RunConfig parse(std::string_view text, std::string_view source = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    bool has(const std::string& key) const { return values_.contains(key); }
    const std::map<std::string, std::string>& values() const { return values_; }

    // Typed lookups fall back to the registered default for the key.
    std::string get_string(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;  // on/off, true/false, yes/no, 1/0
    std::vector<std::size_t> get_size_list(const std::string& key) const;  // comma separated
    std::filesystem::path get_path(const std::string& key) const;          // throws when unset

    // Throws on keys without a registered default.
    void check_known_keys() const;

    // Every result-affecting key with its resolved value. Paths and the
    // thread count are excluded: they never change output bytes.
    nlohmann::json resolved() const;

private:
    std::map<std::string, std::string> values_;
};

// Registered keys and their defaults.
const std::map<std::string, std::string>& config_defaults();

}  // namespace dar
