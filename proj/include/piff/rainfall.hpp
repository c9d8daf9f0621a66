#pragma once

// 24-hour rainfall series and scenario generators.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "piff/error.hpp"
#include "piff/textio.hpp"

namespace piff {

inline constexpr std::size_t kHours = 24;

enum class RainCategory { uniform, nonuniform, real };

inline std::string_view to_string(RainCategory c) {
    switch (c) {
    case RainCategory::uniform: return "uniform";
    case RainCategory::nonuniform: return "nonuniform";
    case RainCategory::real: return "real";
    }
    return "real";
}

struct RainfallSeries {
    std::array<double, kHours> hourly{}; // mm per hour
    RainCategory category = RainCategory::real;
    std::string label;

    double total() const { return std::accumulate(hourly.begin(), hourly.end(), 0.0); }
    bool operator==(const RainfallSeries&) const = default;
};

inline void validate(const RainfallSeries& s) {
    for (std::size_t h = 0; h < kHours; ++h) {
        if (!std::isfinite(s.hourly[h]) || s.hourly[h] < 0.0)
            throw RainfallError("rainfall at hour " + std::to_string(h + 1) + " must be finite and non-negative");
    }
}

inline RainfallSeries gen_uniform(double total_mm) {
    if (!(total_mm >= 0.0) || !std::isfinite(total_mm)) throw RainfallError("total rainfall must be non-negative");
    RainfallSeries s;
    s.hourly.fill(total_mm / static_cast<double>(kHours));
    s.category = RainCategory::uniform;
    s.label = "uniform_" + textio::format_double(total_mm) + "mm";
    return s;
}

/// Unshuffled Gaussian-shaped hyetograph over hours 1..24, renormalized so
/// the hourly values sum to `total_mm`.
inline std::array<double, kHours> gaussian_profile(double total_mm, double peak_hour_mean, double spread) {
    if (!(total_mm >= 0.0) || !std::isfinite(total_mm)) throw RainfallError("total rainfall must be non-negative");
    if (!(spread > 0.0)) throw RainfallError("spread must be positive");
    std::array<double, kHours> w{};
    for (std::size_t h = 0; h < kHours; ++h) {
        const double d = (static_cast<double>(h + 1) - peak_hour_mean) / spread;
        w[h] = std::exp(-0.5 * d * d);
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(sum > 0.0)) throw RainfallError("Gaussian profile underflows on hours 1..24; move the peak closer");
    for (double& v : w) v = v / sum * total_mm;
    return w;
}

inline RainfallSeries gen_nonuniform(double total_mm, double peak_hour_mean, double spread, std::uint64_t seed) {
    RainfallSeries s;
    s.hourly = gaussian_profile(total_mm, peak_hour_mean, spread);
    std::mt19937_64 rng(seed);
    std::shuffle(s.hourly.begin(), s.hourly.end(), rng);
    s.category = RainCategory::nonuniform;
    s.label = "nonuniform_" + textio::format_double(total_mm) + "mm_seed" + std::to_string(seed);
    return s;
}

inline RainfallSeries gen_nonuniform(double total_mm, std::uint64_t seed) {
    return gen_nonuniform(total_mm, 12.0, 4.0, seed);
}

/// Rainfall accumulated over hours 1..through_hour, in mm.
inline double cumulative(const RainfallSeries& s, std::size_t through_hour) {
    if (through_hour < 1 || through_hour > kHours)
        throw RainfallError("hour " + std::to_string(through_hour) + " outside 1..24");
    double acc = 0.0;
    for (std::size_t h = 0; h < through_hour; ++h) acc += s.hourly[h];
    return acc;
}

// ---------------------------------------------------------------------------
// CSV: header "hour,mm" then rows "1,<mm>" .. "24,<mm>"

inline RainfallSeries parse_event_csv(std::istream& in, const std::string& name = "<stream>") {
    RainfallSeries s;
    s.category = RainCategory::real;
    s.label = name;
    std::string line;
    std::size_t lineno = 0;
    std::size_t rows = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = textio::trim(line);
        if (body.empty()) continue;
        const auto cells = textio::split_ws(body, true);
        if (!header_seen) {
            header_seen = true;
            if (cells.size() == 2 && cells[0] == "hour" && cells[1] == "mm") continue;
            throw RainfallError(name + ":" + std::to_string(lineno) + ": expected header 'hour,mm'");
        }
        if (cells.size() != 2)
            throw RainfallError(name + ":" + std::to_string(lineno) + ": expected two columns 'hour,mm'");
        const auto hour = textio::parse_int<long long>(cells[0]);
        const auto mm = textio::parse_double(cells[1]);
        if (!hour || !mm)
            throw RainfallError(name + ":" + std::to_string(lineno) + ": non-numeric token in '" + std::string(body) + "'");
        if (rows >= kHours)
            throw RainfallError(name + ": more than 24 data rows");
        if (*hour != static_cast<long long>(rows + 1))
            throw RainfallError(name + ":" + std::to_string(lineno) + ": expected hour " + std::to_string(rows + 1));
        if (!std::isfinite(*mm) || *mm < 0.0)
            throw RainfallError(name + ":" + std::to_string(lineno) + ": negative or non-finite rainfall at hour " +
                                std::to_string(*hour));
        s.hourly[rows++] = *mm;
    }
    if (rows != kHours)
        throw RainfallError(name + ": found " + std::to_string(rows) + " data rows, expected 24");
    return s;
}

inline RainfallSeries load_event_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RainfallError("cannot open rainfall file '" + path + "'");
    return parse_event_csv(in, path);
}

inline std::string to_event_csv(const RainfallSeries& s) {
    std::ostringstream os;
    os << "hour,mm\n";
    for (std::size_t h = 0; h < kHours; ++h) os << (h + 1) << ',' << textio::format_double(s.hourly[h]) << '\n';
    return os.str();
}

inline void save_event_csv(const RainfallSeries& s, const std::string& path) {
    validate(s);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RainfallError("cannot write '" + path + "'");
    out << to_event_csv(s);
    if (!out) throw RainfallError("write failed for '" + path + "'");
}

} // namespace piff
