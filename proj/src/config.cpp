#include "pipehmm/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pipehmm/errors.hpp"

namespace pipehmm {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail_key(const std::string& section, const std::string& key,
                           const std::string& why) {
    throw std::invalid_argument("config key '" + key + "' in section [" + section + "]: " + why);
}

}  // namespace

bool ConfigSection::has(const std::string& key) const {
    return raw(key).has_value();
}

std::optional<std::string> ConfigSection::raw(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
        if (k == key) return v;
    }
    return std::nullopt;
}

void ConfigSection::set(const std::string& key, const std::string& value) {
    if (has(key)) fail_key(name_, key, "duplicate key");
    entries_.emplace_back(key, value);
}

std::string ConfigSection::get_string(const std::string& key) const {
    auto v = raw(key);
    if (!v) fail_key(name_, key, "missing");
    return *v;
}

std::string ConfigSection::get_string_or(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
}

double ConfigSection::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || errno == ERANGE) {
        fail_key(name_, key, "not a number: '" + v + "'");
    }
    return d;
}

double ConfigSection::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::uint64_t ConfigSection::get_u64(const std::string& key) const {
    const std::string v = get_string(key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail_key(name_, key, "not an unsigned integer: '" + v + "'");
    }
    return out;
}

std::uint64_t ConfigSection::get_u64_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
}

long ConfigSection::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail_key(name_, key, "not an integer: '" + v + "'");
    }
    return out;
}

long ConfigSection::get_int_or(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool ConfigSection::get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail_key(name_, key, "not a boolean: '" + v + "'");
}

const ConfigSection* ConfigDoc::find(const std::string& name) const {
    for (const auto& s : sections_) {
        if (s.name() == name) return &s;
    }
    return nullptr;
}

const ConfigSection& ConfigDoc::require(const std::string& name) const {
    const ConfigSection* s = find(name);
    if (!s) throw std::invalid_argument(source_ + ": missing section [" + name + "]");
    return *s;
}

ConfigDoc ConfigDoc::parse_text(const std::string& text, const std::string& source_name) {
    ConfigDoc doc;
    doc.source_ = source_name;
    doc.sections_.emplace_back(std::string{});

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw std::invalid_argument(source_name + ":" + std::to_string(line_no) +
                                            ": unterminated section header");
            }
            doc.sections_.emplace_back(trim(t.substr(1, t.size() - 2)));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(source_name + ":" + std::to_string(line_no) +
                                        ": expected key=value, got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument(source_name + ":" + std::to_string(line_no) +
                                        ": empty key");
        }
        doc.sections_.back().set(key, value);
    }
    return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path.filename().string());
}

}  // namespace pipehmm
