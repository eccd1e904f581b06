#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pipehmm {

// One `[section]` of a key=value configuration document. Entries keep file
// order; keys are unique within a section.
class ConfigSection {
public:
    ConfigSection() = default;
    explicit ConfigSection(std::string name) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }
    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    bool has(const std::string& key) const;

    // Typed getters. The non-optional forms throw std::invalid_argument when
    // the key is absent or does not parse.
    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;
    long get_int(const std::string& key) const;
    long get_int_or(const std::string& key, long fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value);  // throws on duplicate

private:
    std::optional<std::string> raw(const std::string& key) const;

    std::string name_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

// A parsed configuration document: `#` comments, `[section]` headers and
// `key=value` lines. Keys before the first header land in an unnamed section.
// Section order follows the file so state sections keep their declared order.
class ConfigDoc {
public:
    const std::vector<ConfigSection>& sections() const { return sections_; }
    const ConfigSection* find(const std::string& name) const;
    // As find(), but throws std::invalid_argument naming the missing section.
    const ConfigSection& require(const std::string& name) const;

    static ConfigDoc parse_text(const std::string& text, const std::string& source_name);
    static ConfigDoc parse_file(const std::filesystem::path& path);

private:
    std::vector<ConfigSection> sections_;
    std::string source_;
};

}  // namespace pipehmm
