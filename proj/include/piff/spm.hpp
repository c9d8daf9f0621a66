#pragma once

// Simplified inundation model: uniform rainfall accumulation followed by
// iterative D4 redistribution of water between neighboring cells until the
// water surface stops moving. Volume is conserved at every sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "piff/error.hpp"
#include "piff/grid.hpp"
#include "piff/parallel.hpp"
#include "piff/rainfall.hpp"

namespace piff {

struct SpmConfig {
    double phi = 0.25;          // fraction of the surface difference moved per sweep
    double tol_level = 1e-6;    // m; stop when per-cell changes and wet surface drops fall below this
    double tol_mass = 1e-9;     // relative volume error allowed
    std::size_t max_iters = 100000;
    std::size_t workers = 1;    // row bands per sweep
    bool literal_rule = false;  // compare Z_c + h_c against bare Z_n instead of Z_n + h_n
};

inline void validate(const SpmConfig& cfg) {
    if (!(cfg.phi > 0.0 && cfg.phi <= 0.25)) throw SpmError("phi must lie in (0, 0.25]");
    if (!(cfg.tol_level > 0.0) || !(cfg.tol_mass > 0.0)) throw SpmError("tolerances must be positive");
    if (cfg.max_iters < 1) throw SpmError("max_iters must be at least 1");
    if (cfg.workers < 1) throw SpmError("workers must be at least 1");
}

struct SpmResult {
    FloodMap flood;
    std::size_t iterations = 0;
    double mass_error = 0.0; // worst relative volume discrepancy over all sweeps
    double residual = 0.0;   // largest per-cell change in the final sweep
    double max_drop = 0.0;   // largest surface drop out of a wet cell in the final sweep
    bool converged = false;
};

/// Per-sweep diagnostics handed to an optional observer.
struct SweepStats {
    std::size_t iteration = 0;
    double max_change = 0.0;
    double max_drop = 0.0;
    double mass_error = 0.0;
    double min_depth = 0.0;
    const std::vector<double>* depths = nullptr;
};

using SweepObserver = std::function<void(const SweepStats&)>;

namespace detail {

struct SpmNeighbors {
    // Up to four valid neighbor indices per cell, padded with npos.
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::vector<std::array<std::size_t, 4>> idx;

    explicit SpmNeighbors(const DemGrid& dem) : idx(dem.geom.size()) {
        const auto& g = dem.geom;
        for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < g.cols; ++c) {
                const std::size_t i = g.index(r, c);
                auto& n = idx[i];
                n.fill(npos);
                if (dem.is_nodata(i)) continue;
                std::size_t k = 0;
                auto add = [&](std::size_t j) {
                    if (!dem.is_nodata(j)) n[k++] = j;
                };
                if (r > 0) add(g.index(r - 1, c));
                if (c > 0) add(g.index(r, c - 1));
                if (c + 1 < g.cols) add(g.index(r, c + 1));
                if (r + 1 < g.rows) add(g.index(r + 1, c));
            }
        }
    }
};

} // namespace detail

inline SpmResult spm_simulate(const DemGrid& dem, double rain_depth, const SpmConfig& cfg,
                              const SweepObserver& observer = {}) {
    validate(dem);
    validate(cfg);
    if (!(rain_depth >= 0.0) || !std::isfinite(rain_depth)) throw SpmError("rain depth must be non-negative");

    const std::size_t n = dem.geom.size();
    const detail::SpmNeighbors nbr(dem);
    const auto& z = dem.elevations;
    const std::size_t valid = dem.valid_count();
    const double expected = rain_depth * static_cast<double>(valid);

    std::vector<double> h(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (!dem.is_nodata(i)) h[i] = rain_depth;
    std::vector<double> next(n, 0.0);
    std::vector<double> scale(n, 0.0); // per-source outflow scaling after the depth cap
    std::vector<double> change(n, 0.0);
    std::vector<double> drop(n, 0.0);   // largest transfer out of the cell, divided by phi

    // Transfer scheduled from cell i to neighbor j, before capping.
    auto demand = [&](std::size_t i, std::size_t j) {
        const double src = z[i] + h[i];
        const double dst = cfg.literal_rule ? z[j] : z[j] + h[j];
        return src > dst ? cfg.phi * (src - dst) : 0.0;
    };

    const std::size_t rows = dem.geom.rows;
    const std::size_t cols = dem.geom.cols;
    SpmResult res;
    res.flood.geom = dem.geom;

    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        parallel_blocks(cfg.workers, rows, [&](std::size_t rb, std::size_t re) {
            for (std::size_t i = rb * cols; i < re * cols; ++i) {
                double out = 0.0;
                for (std::size_t j : nbr.idx[i])
                    if (j != detail::SpmNeighbors::npos) out += demand(i, j);
                scale[i] = (out > h[i] && out > 0.0) ? h[i] / out : 1.0;
            }
        });
        parallel_blocks(cfg.workers, rows, [&](std::size_t rb, std::size_t re) {
            for (std::size_t i = rb * cols; i < re * cols; ++i) {
                double delta = 0.0, out_max = 0.0;
                for (std::size_t j : nbr.idx[i]) {
                    if (j == detail::SpmNeighbors::npos) continue;
                    const double out = scale[i] * demand(i, j);
                    out_max = std::max(out_max, out);
                    delta -= out;
                    delta += scale[j] * demand(j, i);
                }
                drop[i] = out_max / cfg.phi;
                // The cap guarantees h_i >= total outflow; clamp rounding residue.
                next[i] = std::max(0.0, h[i] + delta);
                change[i] = std::abs(next[i] - h[i]);
            }
        });
        h.swap(next);

        double total = 0.0, max_change = 0.0, max_drop = 0.0, min_depth = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            total += h[i];
            max_change = std::max(max_change, change[i]);
            max_drop = std::max(max_drop, drop[i]);
            min_depth = std::min(min_depth, h[i]);
        }
        const double mass_err = expected > 0.0 ? std::abs(total - expected) / expected : std::abs(total);
        res.mass_error = std::max(res.mass_error, mass_err);
        res.iterations = it;
        res.residual = max_change;
        res.max_drop = max_drop;
        if (observer) observer(SweepStats{it, max_change, max_drop, mass_err, min_depth, &h});
        // A small per-cell change alone can hide steady flow-through along a
        // slope, so the wet surface must also be level to within tol_level.
        if (max_change < cfg.tol_level && max_drop < cfg.tol_level) {
            res.converged = true;
            break;
        }
    }
    res.flood.depths = std::move(h);
    return res;
}

/// Like spm_simulate, but raises SpmError when the run does not converge or
/// breaks the mass tolerance.
inline FloodMap spm_flood(const DemGrid& dem, double rain_depth, const SpmConfig& cfg) {
    SpmResult r = spm_simulate(dem, rain_depth, cfg);
    if (!r.converged)
        throw SpmError("SPM did not converge in " + std::to_string(r.iterations) + " sweeps (residual " +
                       textio::format_double(r.residual) + " m)");
    if (r.mass_error > cfg.tol_mass)
        throw SpmError("SPM mass error " + textio::format_double(r.mass_error) + " exceeds tolerance");
    return std::move(r.flood);
}

/// SPM flood map after each hour's cumulative rainfall; element h-1 is hour h.
inline std::vector<FloodMap> spm_prior_sequence(const DemGrid& dem, const RainfallSeries& series,
                                                const SpmConfig& cfg) {
    validate(series);
    std::vector<FloodMap> out;
    out.reserve(kHours);
    for (std::size_t hour = 1; hour <= kHours; ++hour)
        out.push_back(spm_flood(dem, cumulative(series, hour) / 1000.0, cfg));
    return out;
}

/// Level-pool equilibrium: pour the rainfall volume onto the terrain and find
/// the single water level L with sum(max(0, L - Z)) equal to that volume.
/// Exact for terrain whose only pit is the global minimum, where every
/// sub-level set is hydraulically connected.
inline FloodMap hydrostatic_fill(const DemGrid& dem, double rain_depth) {
    validate(dem);
    if (!(rain_depth >= 0.0) || !std::isfinite(rain_depth)) throw SpmError("rain depth must be non-negative");
    FloodMap out = zero_flood(dem.geom);
    std::vector<double> zs;
    zs.reserve(dem.geom.size());
    for (std::size_t i = 0; i < dem.geom.size(); ++i)
        if (!dem.is_nodata(i)) zs.push_back(dem.elevations[i]);
    if (zs.empty() || rain_depth == 0.0) return out;
    std::sort(zs.begin(), zs.end());
    const double volume = rain_depth * static_cast<double>(zs.size());

    // Walk up the sorted elevations; with k cells submerged the level is
    // (volume + sum of their elevations) / k, valid while below zs[k].
    double prefix = 0.0;
    double level = 0.0;
    for (std::size_t k = 1; k <= zs.size(); ++k) {
        prefix += zs[k - 1];
        level = (volume + prefix) / static_cast<double>(k);
        if (k == zs.size() || level <= zs[k]) break;
    }
    for (std::size_t i = 0; i < dem.geom.size(); ++i)
        if (!dem.is_nodata(i)) out.depths[i] = std::max(0.0, level - dem.elevations[i]);
    return out;
}

} // namespace piff
