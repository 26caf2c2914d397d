#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace padapt {

/// 64-bit FNV-1a. Stable across platforms; used for content-addressed ids and seed derivation.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Mixes a base seed with a list of tags into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> tags);

std::string hex64(std::uint64_t v);

/// Flat UTF-8 `key = value` file. `#` starts a comment; `[section name]` headers
/// open a named subsection whose keys are stored separately.
class KeyValueConfig {
public:
    struct Section {
        std::string kind;
        std::string name;
        std::map<std::string, std::string> values;
    };

    static KeyValueConfig parse(std::string_view text);
    static KeyValueConfig load(const std::filesystem::path& path);

    const std::map<std::string, std::string>& values() const noexcept { return top_; }
    const std::vector<Section>& sections() const noexcept { return sections_; }

    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    bool has(const std::string& key) const { return top_.count(key) != 0; }

private:
    std::map<std::string, std::string> top_;
    std::vector<Section> sections_;
};

/// Typed lookups that throw InvalidArgument naming the key on malformed values.
long parse_long(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<long> parse_long_list(const std::string& key, const std::string& value);

std::string iso8601_now();

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates the same multi-megabyte buffers every step; without
/// this each one costs fresh page faults. Idempotent; no-op off glibc.
void retain_heap_memory();

}  // namespace padapt
