#include "spikeloop/kv_text.hpp"

#include "spikeloop/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <set>

namespace spikeloop {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<KvLine> read_kv_lines(std::istream& in)
{
    std::vector<KvLine> out;
    std::set<std::string> seen;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("", line_no, fmt::format("expected 'key = value', got '{}'", line));
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty())
            throw ConfigError("", line_no, "empty key");
        if (!seen.insert(key).second)
            throw ConfigError(key, line_no, fmt::format("duplicate key '{}'", key));
        out.push_back({std::move(key), std::move(value), line_no});
    }
    return out;
}

double parse_double(std::string_view text, const std::string& key, int line_no)
{
    // strtod rather than from_chars: GCC 11 from_chars<double> support is
    // incomplete on some targets.
    std::string buf(trim(text));
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v))
        throw ConfigError(key, line_no, fmt::format("invalid value '{}' for '{}'", text, key));
    return v;
}

std::int64_t parse_int(std::string_view text, const std::string& key, int line_no)
{
    text = trim(text);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError(key, line_no, fmt::format("invalid integer '{}' for '{}'", text, key));
    return v;
}

std::uint64_t parse_u64(std::string_view text, const std::string& key, int line_no)
{
    text = trim(text);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError(key, line_no,
                          fmt::format("invalid unsigned integer '{}' for '{}'", text, key));
    return v;
}

bool parse_bool(std::string_view text, const std::string& key, int line_no)
{
    text = trim(text);
    if (text == "true" || text == "1")
        return true;
    if (text == "false" || text == "0")
        return false;
    throw ConfigError(key, line_no, fmt::format("invalid boolean '{}' for '{}'", text, key));
}

std::vector<std::string> split_list(std::string_view text)
{
    std::vector<std::string> out;
    text = trim(text);
    if (text.empty())
        return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.emplace_back(trim(text.substr(start, comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

} // namespace spikeloop
