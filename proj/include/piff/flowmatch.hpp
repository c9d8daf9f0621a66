#pragma once

// Optimal-transport conditional flow matching between flood maps (t = 0)
// and DEMs (t = 1): straight-line probability paths with Gaussian noise,
// the constant target velocity x1 - x0, the MSE training objective, the
// training loop and ODE sampling from the DEM back to a flood map.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "piff/error.hpp"
#include "piff/grid.hpp"
#include "piff/neural.hpp"
#include "piff/odesolve.hpp"
#include "piff/parallel.hpp"
#include "piff/rainfall.hpp"

namespace piff {

struct CfmConfig {
    double sigma = 0.1;
    std::size_t batch = 128;
    double lr = 5e-4;
    std::size_t iters = 10000;
    double lr_decay = 0.99;
    std::size_t decay_every = 1000;
    std::uint64_t seed = 0;
    std::size_t workers = 1; // per-sample parallelism inside an iteration
};

inline void validate(const CfmConfig& cfg) {
    if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) throw CfmError("sigma must be non-negative");
    if (cfg.batch < 1) throw CfmError("batch must be at least 1");
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw CfmError("learning rate must be positive");
    if (!(cfg.lr_decay > 0.0) || cfg.decay_every < 1) throw CfmError("invalid learning-rate decay");
    if (cfg.workers < 1) throw CfmError("workers must be at least 1");
}

/// Learning rate after `iter` completed steps: lr * decay^floor(iter / every).
inline double decayed_lr(const CfmConfig& cfg, std::size_t iter) {
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(iter / cfg.decay_every));
}

// ---------------------------------------------------------------------------
// Normalization: DEM and depth values each mapped affinely onto [-1, 1].

struct Normalization {
    double dem_min = 0.0, dem_max = 1.0;
    double depth_min = 0.0, depth_max = 1.0;
    double rain_scale = 1.0; // mm/h mapped to 1

    static double to_unit(double v, double lo, double hi) {
        const double span = hi > lo ? hi - lo : 1.0;
        return 2.0 * (v - lo) / span - 1.0;
    }
    static double from_unit(double u, double lo, double hi) {
        const double span = hi > lo ? hi - lo : 1.0;
        return (u + 1.0) * 0.5 * span + lo;
    }
    double dem_to_unit(double z) const { return to_unit(z, dem_min, dem_max); }
    double depth_to_unit(double d) const { return to_unit(d, depth_min, depth_max); }
    double depth_from_unit(double u) const { return from_unit(u, depth_min, depth_max); }
    bool operator==(const Normalization&) const = default;
};

/// One training scenario: a DEM, its rainfall and the per-hour SPM priors and
/// reference flood maps (element h-1 is hour h).
struct Scenario {
    DemGrid dem;
    RainfallSeries rain;
    std::vector<FloodMap> priors;
    std::vector<FloodMap> truths;
};

inline void validate(const Scenario& s) {
    validate(s.dem);
    validate(s.rain);
    if (s.priors.size() != kHours || s.truths.size() != kHours)
        throw CfmError("scenario needs 24 prior and 24 truth maps");
    for (std::size_t h = 0; h < kHours; ++h) {
        if (!s.priors[h].geom.same_shape(s.dem.geom) || !s.truths[h].geom.same_shape(s.dem.geom))
            throw CfmError("scenario '" + s.rain.label + "' has maps that do not match its DEM shape");
    }
}

inline Normalization fit_normalization(std::span<const Scenario> data) {
    Normalization n;
    n.dem_min = std::numeric_limits<double>::infinity();
    n.dem_max = -std::numeric_limits<double>::infinity();
    n.depth_min = 0.0;
    n.depth_max = 0.0;
    double rain = 0.0;
    for (const auto& s : data) {
        for (std::size_t i = 0; i < s.dem.elevations.size(); ++i) {
            if (s.dem.is_nodata(i)) continue;
            n.dem_min = std::min(n.dem_min, s.dem.elevations[i]);
            n.dem_max = std::max(n.dem_max, s.dem.elevations[i]);
        }
        for (const auto* maps : {&s.priors, &s.truths})
            for (const auto& m : *maps)
                for (double d : m.depths) n.depth_max = std::max(n.depth_max, d);
        for (double r : s.rain.hourly) rain = std::max(rain, r);
    }
    if (!std::isfinite(n.dem_min)) {
        n.dem_min = 0.0;
        n.dem_max = 1.0;
    }
    if (!(n.depth_max > n.depth_min)) n.depth_max = n.depth_min + 1.0;
    n.rain_scale = rain > 0.0 ? rain : 1.0;
    return n;
}

inline std::vector<double> normalize_dem(const DemGrid& dem, const Normalization& n) {
    std::vector<double> out(dem.elevations.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dem.is_nodata(i) ? -1.0 : n.dem_to_unit(dem.elevations[i]);
    return out;
}

inline std::vector<double> normalize_depth(const FloodMap& map, const Normalization& n) {
    std::vector<double> out(map.depths.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = n.depth_to_unit(map.depths[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Conditioning and probability paths

/// Everything the velocity field sees besides (x_t, t), in model units.
/// The rainfall series is scaled and truncated to the hours observed so far.
struct Conditioning {
    std::size_t rows = 0, cols = 0;
    std::vector<double> dem;
    std::vector<double> spm;
    nn::SeriesInput series{};
};

inline Conditioning make_conditioning(const DemGrid& dem, const RainfallSeries& rain, std::size_t hour,
                                      const FloodMap& prior, const Normalization& n) {
    if (hour < 1 || hour > kHours) throw CfmError("hour must lie in 1..24");
    if (!prior.geom.same_shape(dem.geom)) throw CfmError("SPM prior does not match the DEM shape");
    Conditioning c;
    c.rows = dem.rows();
    c.cols = dem.cols();
    c.dem = normalize_dem(dem, n);
    c.spm = normalize_depth(prior, n);
    for (std::size_t h = 0; h < hour; ++h) c.series[h] = rain.hourly[h] / n.rain_scale;
    return c;
}

struct PathSample {
    std::vector<double> x_t;
    double t = 0.0;
    std::vector<double> u_target;
    Conditioning cond;
};

/// x_t = (1 - t) x0 + t x1 + sigma * eps,  u = x1 - x0.
inline PathSample sample_path(std::span<const double> x0, std::span<const double> x1, double t, double sigma,
                              std::uint64_t noise_seed) {
    if (x0.size() != x1.size()) throw CfmError("path endpoints have different sizes");
    if (!(t >= 0.0 && t <= 1.0)) throw CfmError("path time must lie in [0, 1]");
    if (!(sigma >= 0.0)) throw CfmError("sigma must be non-negative");
    PathSample s;
    s.t = t;
    s.x_t.resize(x0.size());
    s.u_target.resize(x0.size());
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> eps(0.0, 1.0);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        s.x_t[i] = (1.0 - t) * x0[i] + t * x1[i];
        if (sigma > 0.0) s.x_t[i] += sigma * eps(rng);
        s.u_target[i] = x1[i] - x0[i];
    }
    return s;
}

inline PathSample sample_path(const FloodMap& x0, const DemGrid& x1, double t, double sigma, std::uint64_t noise_seed) {
    if (!x0.geom.same_shape(x1.geom)) throw CfmError("flood map and DEM shapes differ");
    PathSample s = sample_path(x0.depths, x1.elevations, t, sigma, noise_seed);
    s.cond.rows = x1.rows();
    s.cond.cols = x1.cols();
    return s;
}

// ---------------------------------------------------------------------------
// Model interfaces

/// Anything that can evaluate the conditional velocity field.
template <class M>
concept VelocityModel = requires(const M& m, std::span<const double> x, double t, const Conditioning& c) {
    { m.velocity(x, t, c) } -> std::convertible_to<std::vector<double>>;
};

/// A velocity model with parameters and an exact backward pass.
template <class M>
concept TrainableField = requires(const M& m, const PathSample& s, std::span<const double> up, std::span<double> g) {
    { m.param_count() } -> std::convertible_to<std::size_t>;
    typename M::Pass;
    { m.forward(s) } -> std::same_as<typename M::Pass>;
    { m.forward(s).prediction } -> std::convertible_to<std::vector<double>>;
    { m.backward(m.forward(s), up, g) };
};

/// The encoder + field network together with the corpus normalization.
struct FlowModel {
    nn::Model net;
    Normalization norm;

    struct Pass {
        std::vector<double> prediction;
        nn::ForwardCache cache;
    };

    std::size_t param_count() const { return net.param_count(); }

    static nn::ModelInput input(std::span<const double> x, double t, const Conditioning& c) {
        return nn::ModelInput{c.rows, c.cols, x, t, c.dem, c.spm, c.series};
    }

    std::vector<double> velocity(std::span<const double> x, double t, const Conditioning& c) const {
        return nn::forward(net, input(x, t, c));
    }

    Pass forward(const PathSample& s) const {
        Pass p;
        p.prediction = nn::forward(net, input(s.x_t, s.t, s.cond), &p.cache);
        return p;
    }

    void backward(const Pass& p, std::span<const double> upstream, std::span<double> grad) const {
        nn::backward_into(net, p.cache, upstream, grad);
    }

    bool operator==(const FlowModel& o) const { return net == o.net && norm == o.norm; }
};

// ---------------------------------------------------------------------------
// Loss

struct CfmLoss {
    double loss = 0.0;
    std::vector<double> grad;
    std::vector<double> per_sample;
};

/// Batch mean of per-sample mean squared velocity error, with its exact
/// gradient. Per-sample gradients are reduced in sample order, so the result
/// does not depend on `workers`.
template <TrainableField M>
CfmLoss cfm_loss(const M& model, std::span<const PathSample> batch, std::size_t workers = 1) {
    if (batch.empty()) throw CfmError("CFM loss needs a non-empty batch");
    const std::size_t np = model.param_count();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<std::vector<double>> grads(batch.size());
    std::vector<double> losses(batch.size(), 0.0);

    parallel_blocks(workers, batch.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> up;
        for (std::size_t i = b; i < e; ++i) {
            const PathSample& s = batch[i];
            const auto pass = model.forward(s);
            const auto& pred = pass.prediction;
            if (pred.size() != s.u_target.size()) throw CfmError("prediction size does not match the target");
            const double inv_n = 1.0 / static_cast<double>(pred.size());
            double sq = 0.0;
            up.assign(pred.size(), 0.0);
            for (std::size_t k = 0; k < pred.size(); ++k) {
                const double d = pred[k] - s.u_target[k];
                sq += d * d;
                up[k] = 2.0 * d * inv_n * inv_b;
            }
            losses[i] = sq * inv_n;
            grads[i].assign(np, 0.0);
            if (np > 0 && std::isfinite(losses[i])) model.backward(pass, up, grads[i]);
        }
    });

    CfmLoss out;
    out.grad.assign(np, 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!std::isfinite(losses[i])) throw CfmError("non-finite loss at batch sample " + std::to_string(i));
        out.loss += losses[i] * inv_b;
        for (std::size_t k = 0; k < np; ++k) out.grad[k] += grads[i][k];
    }
    out.per_sample = std::move(losses);
    return out;
}

// ---------------------------------------------------------------------------
// Training

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    std::size_t step = 0;

    void apply(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        if (m.empty()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

struct TrainResult {
    FlowModel model;
    std::vector<double> losses;
};

using TrainProgress = std::function<void(std::size_t iter, double loss)>;

inline TrainResult train(std::span<const Scenario> data, const CfmConfig& cfg, const nn::ModelShape& shape = {},
                         const TrainProgress& progress = {}) {
    validate(cfg);
    if (data.empty()) throw CfmError("training needs at least one scenario");
    for (const auto& s : data) validate(s);

    TrainResult res;
    res.model.norm = fit_normalization(data);
    res.model.net = nn::init_model(shape, cfg.seed);
    const Normalization& norm = res.model.norm;

    // Model-unit endpoints and conditioning, one per (scenario, hour).
    std::vector<Conditioning> conds;
    std::vector<std::vector<double>> truth_unit;
    conds.reserve(data.size() * kHours);
    truth_unit.reserve(data.size() * kHours);
    std::vector<std::vector<double>> dem_unit;
    for (const auto& s : data) {
        dem_unit.push_back(normalize_dem(s.dem, norm));
        for (std::size_t h = 1; h <= kHours; ++h) {
            conds.push_back(make_conditioning(s.dem, s.rain, h, s.priors[h - 1], norm));
            truth_unit.push_back(normalize_depth(s.truths[h - 1], norm));
        }
    }

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> pick_scenario(0, data.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_hour(1, kHours);
    std::uniform_real_distribution<double> pick_t(0.0, 1.0);
    Adam opt;
    std::vector<PathSample> batch(cfg.batch);
    res.losses.reserve(cfg.iters);

    for (std::size_t it = 0; it < cfg.iters; ++it) {
        for (auto& s : batch) {
            const std::size_t si = pick_scenario(rng);
            const std::size_t hour = pick_hour(rng);
            const double t = pick_t(rng);
            const std::uint64_t noise_seed = rng();
            const std::size_t k = si * kHours + (hour - 1);
            s = sample_path(truth_unit[k], dem_unit[si], t, cfg.sigma, noise_seed);
            s.cond = conds[k];
        }
        CfmLoss l = cfm_loss(res.model, batch, cfg.workers);
        if (!std::isfinite(l.loss)) throw CfmError("training diverged at iteration " + std::to_string(it));
        opt.apply(res.model.net.params, l.grad, decayed_lr(cfg, it));
        for (double p : res.model.net.params)
            if (!std::isfinite(p)) throw CfmError("training diverged at iteration " + std::to_string(it));
        res.losses.push_back(l.loss);
        if (progress) progress(it, l.loss);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Sampling

/// Integrates the learned field from the DEM (t = 1) to t = 0 and decodes the
/// result to depths in meters, floored at zero. Only `steps` and `method` of
/// `spec` are used.
template <VelocityModel M>
FloodMap sample_flood(const M& model, const Normalization& norm, const DemGrid& dem, const RainfallSeries& series,
                      std::size_t hour, const FloodMap& spm_prior, const OdeSpec& spec) {
    validate(dem);
    const Conditioning cond = make_conditioning(dem, series, hour, spm_prior, norm);
    OdeSpec s = spec;
    s.t_start = 1.0;
    s.t_end = 0.0;
    auto field = [&](std::span<const double> x, double t, std::span<double> out) {
        const auto v = model.velocity(x, t, cond);
        std::copy(v.begin(), v.end(), out.begin());
    };
    const auto x0 = integrate(field, cond.dem, s);
    FloodMap out = zero_flood(dem.geom);
    for (std::size_t i = 0; i < x0.size(); ++i)
        out.depths[i] = dem.is_nodata(i) ? 0.0 : std::max(0.0, norm.depth_from_unit(x0[i]));
    return out;
}

inline FloodMap sample_flood(const FlowModel& model, const DemGrid& dem, const RainfallSeries& series,
                             std::size_t hour, const FloodMap& spm_prior, const OdeSpec& spec) {
    return sample_flood(model, model.norm, dem, series, hour, spm_prior, spec);
}

} // namespace piff
