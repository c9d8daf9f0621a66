#pragma once

// Raster types, ASCII grid I/O, grayscale rendering and synthetic terrain.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "piff/error.hpp"
#include "piff/textio.hpp"

namespace piff {

struct GridGeometry {
    std::size_t rows = 0;
    std::size_t cols = 0;
    double cell_size = 1.0; // meters per cell edge
    double xllcorner = 0.0;
    double yllcorner = 0.0;

    std::size_t size() const noexcept { return rows * cols; }
    double cell_area() const noexcept { return cell_size * cell_size; }
    std::size_t index(std::size_t r, std::size_t c) const noexcept { return r * cols + c; }
    bool same_shape(const GridGeometry& o) const noexcept { return rows == o.rows && cols == o.cols; }
    bool operator==(const GridGeometry&) const = default;
};

inline constexpr double kDefaultNodata = -9999.0;

/// Elevation raster in meters. Row 0 is the northern edge.
struct DemGrid {
    GridGeometry geom;
    double nodata = kDefaultNodata;
    std::vector<double> elevations;

    std::size_t rows() const noexcept { return geom.rows; }
    std::size_t cols() const noexcept { return geom.cols; }
    bool is_nodata(std::size_t i) const noexcept { return elevations[i] == nodata; }
    double at(std::size_t r, std::size_t c) const { return elevations[geom.index(r, c)]; }
    std::size_t valid_count() const {
        return static_cast<std::size_t>(std::count_if(elevations.begin(), elevations.end(),
                                                      [this](double z) { return z != nodata; }));
    }
    bool operator==(const DemGrid&) const = default;
};

/// Water-depth raster in meters.
struct FloodMap {
    GridGeometry geom;
    std::vector<double> depths;

    std::size_t rows() const noexcept { return geom.rows; }
    std::size_t cols() const noexcept { return geom.cols; }
    double at(std::size_t r, std::size_t c) const { return depths[geom.index(r, c)]; }
    double volume() const {
        double v = 0.0;
        for (double d : depths) v += d;
        return v * geom.cell_area();
    }
    bool operator==(const FloodMap&) const = default;
};

/// Grayscale image; 255 is dry, darker is deeper.
struct RasterRender {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;
};

inline void validate_geometry(const GridGeometry& g) {
    if (g.rows < 1 || g.cols < 1) throw GridError("grid must have at least one row and one column");
    if (!(g.cell_size > 0.0) || !std::isfinite(g.cell_size)) throw GridError("cell size must be positive");
}

inline void validate(const DemGrid& dem) {
    validate_geometry(dem.geom);
    if (dem.elevations.size() != dem.geom.size())
        throw GridError("elevation count does not match grid dimensions");
    for (std::size_t i = 0; i < dem.elevations.size(); ++i) {
        if (!dem.is_nodata(i) && !std::isfinite(dem.elevations[i]))
            throw GridError("non-finite elevation at cell " + std::to_string(i));
    }
}

inline void validate(const FloodMap& map) {
    validate_geometry(map.geom);
    if (map.depths.size() != map.geom.size()) throw GridError("depth count does not match grid dimensions");
    for (std::size_t i = 0; i < map.depths.size(); ++i) {
        const double d = map.depths[i];
        if (!std::isfinite(d) || d < 0.0)
            throw GridError("invalid depth " + textio::format_double(d) + " at cell " + std::to_string(i));
    }
}

inline FloodMap zero_flood(const GridGeometry& g) { return FloodMap{g, std::vector<double>(g.size(), 0.0)}; }

// ---------------------------------------------------------------------------
// ASCII grid format

namespace detail {

inline bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

inline std::string at_line(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line) + ": ";
}

} // namespace detail

/// Parses an ESRI-style ASCII grid. Header keys are case-insensitive; the
/// header ends at the first line whose first token is numeric.
inline DemGrid parse_ascii_grid(std::istream& in, const std::string& name = "<stream>") {
    DemGrid dem;
    bool have_cols = false, have_rows = false, have_cell = false;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string_view> tokens;
    bool body_started = false;

    while (!body_started && std::getline(in, line)) {
        ++lineno;
        tokens = textio::split_ws(line);
        if (tokens.empty()) continue;
        if (textio::parse_double(tokens[0])) {
            body_started = true;
            break;
        }
        if (tokens.size() != 2) throw GridError(detail::at_line(name, lineno) + "malformed header line");
        const auto key = tokens[0];
        const auto value = textio::parse_double(tokens[1]);
        if (!value) throw GridError(detail::at_line(name, lineno) + "non-numeric header value '" + std::string(tokens[1]) + "'");
        if (detail::iequals(key, "ncols") || detail::iequals(key, "nrows")) {
            auto n = textio::parse_int<long long>(tokens[1]);
            if (!n || *n < 1) throw GridError(detail::at_line(name, lineno) + "dimension must be a positive integer");
            if (detail::iequals(key, "ncols")) {
                dem.geom.cols = static_cast<std::size_t>(*n);
                have_cols = true;
            } else {
                dem.geom.rows = static_cast<std::size_t>(*n);
                have_rows = true;
            }
        } else if (detail::iequals(key, "xllcorner") || detail::iequals(key, "xllcenter")) {
            dem.geom.xllcorner = *value;
        } else if (detail::iequals(key, "yllcorner") || detail::iequals(key, "yllcenter")) {
            dem.geom.yllcorner = *value;
        } else if (detail::iequals(key, "cellsize")) {
            if (!(*value > 0.0)) throw GridError(detail::at_line(name, lineno) + "cellsize must be positive");
            dem.geom.cell_size = *value;
            have_cell = true;
        } else if (detail::iequals(key, "nodata_value")) {
            dem.nodata = *value;
        } else {
            throw GridError(detail::at_line(name, lineno) + "unknown header key '" + std::string(key) + "'");
        }
    }
    if (!have_cols || !have_rows || !have_cell)
        throw GridError(detail::at_line(name, lineno) + "header must define ncols, nrows and cellsize");

    dem.elevations.reserve(dem.geom.size());
    std::size_t row = 0;
    auto consume = [&](const std::vector<std::string_view>& toks) {
        if (row >= dem.geom.rows)
            throw GridError(detail::at_line(name, lineno) + "more than nrows=" + std::to_string(dem.geom.rows) + " data rows");
        if (toks.size() != dem.geom.cols)
            throw GridError(detail::at_line(name, lineno) + "row " + std::to_string(row) + " has " +
                            std::to_string(toks.size()) + " values, expected ncols=" + std::to_string(dem.geom.cols));
        for (auto t : toks) {
            auto v = textio::parse_double(t);
            if (!v) throw GridError(detail::at_line(name, lineno) + "non-numeric token '" + std::string(t) + "'");
            if (*v != dem.nodata && !std::isfinite(*v))
                throw GridError(detail::at_line(name, lineno) + "non-finite value '" + std::string(t) + "'");
            dem.elevations.push_back(*v);
        }
        ++row;
    };
    if (body_started) consume(tokens);
    while (std::getline(in, line)) {
        ++lineno;
        tokens = textio::split_ws(line);
        if (tokens.empty()) continue;
        consume(tokens);
    }
    if (row != dem.geom.rows)
        throw GridError(detail::at_line(name, lineno) + "found " + std::to_string(row) + " data rows, expected nrows=" +
                        std::to_string(dem.geom.rows));
    return dem;
}

inline DemGrid load_ascii_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GridError("cannot open grid file '" + path + "'");
    return parse_ascii_grid(in, path);
}

/// Loads a grid as water depths. Nodata cells become dry cells.
inline FloodMap load_flood_grid(const std::string& path) {
    DemGrid raw = load_ascii_grid(path);
    FloodMap map{raw.geom, {}};
    map.depths.reserve(raw.elevations.size());
    for (std::size_t i = 0; i < raw.elevations.size(); ++i) {
        const double v = raw.is_nodata(i) ? 0.0 : raw.elevations[i];
        if (v < 0.0) throw GridError(path + ": negative depth at cell " + std::to_string(i));
        map.depths.push_back(v);
    }
    return map;
}

namespace detail {

inline void write_grid(std::ostream& out, const GridGeometry& g, double nodata, const std::vector<double>& values) {
    out << "ncols " << g.cols << '\n'
        << "nrows " << g.rows << '\n'
        << "xllcorner " << textio::format_double(g.xllcorner) << '\n'
        << "yllcorner " << textio::format_double(g.yllcorner) << '\n'
        << "cellsize " << textio::format_double(g.cell_size) << '\n'
        << "NODATA_value " << textio::format_double(nodata) << '\n';
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
            if (c) out << ' ';
            out << textio::format_double(values[g.index(r, c)]);
        }
        out << '\n';
    }
}

inline void write_file(const std::string& path, const std::string& content, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw GridError("cannot write '" + path + "'");
    out << content;
    if (!out) throw GridError("write failed for '" + path + "'");
}

} // namespace detail

inline std::string to_ascii_grid(const DemGrid& dem) {
    std::ostringstream os;
    detail::write_grid(os, dem.geom, dem.nodata, dem.elevations);
    return os.str();
}

inline std::string to_ascii_grid(const FloodMap& map) {
    std::ostringstream os;
    detail::write_grid(os, map.geom, kDefaultNodata, map.depths);
    return os.str();
}

inline void save_ascii_grid(const DemGrid& dem, const std::string& path) {
    validate(dem);
    detail::write_file(path, to_ascii_grid(dem));
}

inline void save_ascii_grid(const FloodMap& map, const std::string& path) {
    validate(map);
    detail::write_file(path, to_ascii_grid(map));
}

// ---------------------------------------------------------------------------
// Rendering: 1 gray level per centimeter, saturating at 2.55 m.

inline std::uint8_t depth_to_pixel(double depth_m) {
    const double cm = std::clamp(std::round(depth_m * 100.0), 0.0, 255.0);
    return static_cast<std::uint8_t>(255 - static_cast<int>(cm));
}

inline RasterRender render_depth(const FloodMap& map) {
    RasterRender img{map.rows(), map.cols(), {}};
    img.pixels.reserve(map.depths.size());
    for (double d : map.depths) img.pixels.push_back(depth_to_pixel(d));
    return img;
}

inline void write_pgm(const RasterRender& img, const std::string& path) {
    std::string data = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
    data.append(img.pixels.begin(), img.pixels.end());
    detail::write_file(path, data, std::ios::out | std::ios::binary);
}

// ---------------------------------------------------------------------------
// Synthetic terrain

enum class SynthKind { flat, slope, bowl, channel };

inline SynthKind parse_synth_kind(std::string_view s) {
    if (s == "flat") return SynthKind::flat;
    if (s == "slope") return SynthKind::slope;
    if (s == "bowl") return SynthKind::bowl;
    if (s == "channel") return SynthKind::channel;
    throw GridError("unknown terrain kind '" + std::string(s) + "' (expected flat, slope, bowl or channel)");
}

struct SynthParams {
    double base = 10.0;       // elevation of the lowest reference point (m)
    double gradient = 0.05;   // north-to-south drop per cell (m), slope/channel
    double relief = 2.0;      // bowl rim height or channel incision depth (m)
    double channel_width = 2; // half-width of the incised strip, in cells
    double noise = 0.0;       // uniform noise amplitude (m)
    double cell_size = 20.0;
};

inline DemGrid synth_dem(SynthKind kind, std::size_t rows, std::size_t cols, const SynthParams& p, std::uint64_t seed) {
    if (rows < 2 || cols < 2) throw GridError("synthetic terrain needs at least 2x2 cells");
    DemGrid dem;
    dem.geom = GridGeometry{rows, cols, p.cell_size, 0.0, 0.0};
    dem.elevations.resize(dem.geom.size());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double rc = 0.5 * static_cast<double>(rows - 1);
    const double cc = 0.5 * static_cast<double>(cols - 1);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double north = static_cast<double>(rows - 1 - r);
            double z = p.base;
            switch (kind) {
            case SynthKind::flat:
                break;
            case SynthKind::slope:
                z += p.gradient * north;
                break;
            case SynthKind::bowl: {
                const double dr = (static_cast<double>(r) - rc) / rc;
                const double dc = (static_cast<double>(c) - cc) / cc;
                z += p.relief * (dr * dr + dc * dc);
                break;
            }
            case SynthKind::channel: {
                z += p.gradient * north + p.relief;
                if (std::abs(static_cast<double>(c) - cc) <= p.channel_width) z -= p.relief;
                break;
            }
            }
            if (p.noise > 0.0) z += p.noise * unit(rng);
            dem.elevations[dem.geom.index(r, c)] = z;
        }
    }
    return dem;
}

} // namespace piff
