#pragma once

// Shortest round-trip number formatting and strict token parsing shared by
// the grid, rainfall, checkpoint and report writers.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace piff::textio {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
    if (ec != std::errc{}) return std::to_string(v);
    return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view token) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> parse_int(std::string_view token) {
    Int v{};
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
    return v;
}

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Splits on runs of spaces/tabs (and commas when `comma` is set).
inline std::vector<std::string_view> split_ws(std::string_view s, bool comma = false) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    auto is_sep = [comma](char c) { return c == ' ' || c == '\t' || c == '\r' || (comma && c == ','); };
    while (i < s.size()) {
        while (i < s.size() && is_sep(s[i])) ++i;
        const std::size_t b = i;
        while (i < s.size() && !is_sep(s[i])) ++i;
        if (i > b) out.push_back(s.substr(b, i - b));
    }
    return out;
}

} // namespace piff::textio
