#pragma once

// Shared reader for the line-based `key = value` text files (defaults table,
// run config, manifest). Blank lines and `#` comments are skipped.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace spikeloop {

struct KvLine {
    std::string key;
    std::string value;
    int line_no = 0;
};

// Throws ConfigError carrying the line number on a malformed line or a
// repeated key.
std::vector<KvLine> read_kv_lines(std::istream& in);

double parse_double(std::string_view text, const std::string& key, int line_no = 0);
std::int64_t parse_int(std::string_view text, const std::string& key, int line_no = 0);
std::uint64_t parse_u64(std::string_view text, const std::string& key, int line_no = 0);
bool parse_bool(std::string_view text, const std::string& key, int line_no = 0);
// Comma-separated; an empty string gives an empty list.
std::vector<std::string> split_list(std::string_view text);

std::string_view trim(std::string_view s);

} // namespace spikeloop
