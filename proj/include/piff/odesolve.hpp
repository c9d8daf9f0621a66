#pragma once

// Fixed-step explicit integrators over flat state vectors.

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "piff/error.hpp"

namespace piff {

enum class OdeMethod { euler, heun, rk4 };

inline OdeMethod parse_ode_method(std::string_view s) {
    if (s == "euler") return OdeMethod::euler;
    if (s == "heun") return OdeMethod::heun;
    if (s == "rk4") return OdeMethod::rk4;
    throw OdeError("unknown ODE method '" + std::string(s) + "' (expected euler, heun or rk4)", 0);
}

inline std::string_view to_string(OdeMethod m) {
    switch (m) {
    case OdeMethod::euler: return "euler";
    case OdeMethod::heun: return "heun";
    case OdeMethod::rk4: return "rk4";
    }
    return "euler";
}

struct OdeSpec {
    double t_start = 0.0;
    double t_end = 1.0;
    std::size_t steps = 50;
    OdeMethod method = OdeMethod::euler;

    double step_size() const { return (t_end - t_start) / static_cast<double>(steps); }
};

inline void validate(const OdeSpec& spec) {
    if (spec.steps < 1) throw OdeError("ODE steps must be at least 1", 0);
    if (!(spec.t_start != spec.t_end) || !std::isfinite(spec.t_start) || !std::isfinite(spec.t_end))
        throw OdeError("ODE interval must be finite and non-empty", 0);
}

/// A vector field writes dx/dt at (x, t) into `out` (same length as x).
template <class F>
concept VectorFieldFn = requires(F f, std::span<const double> x, double t, std::span<double> out) {
    { f(x, t, out) };
};

template <VectorFieldFn Field>
std::vector<double> integrate(Field&& field, std::vector<double> x, const OdeSpec& spec) {
    validate(spec);
    const std::size_t n = x.size();
    for (double v : x)
        if (!std::isfinite(v)) throw OdeError("initial state is not finite", 0);

    const double h = spec.step_size();
    std::vector<double> k1(n), k2(n), k3, k4, tmp(n);
    if (spec.method == OdeMethod::rk4) {
        k3.resize(n);
        k4.resize(n);
    }
    auto axpy = [&](const std::vector<double>& base, double a, const std::vector<double>& d, std::vector<double>& dst) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = base[i] + a * d[i];
    };

    for (std::size_t step = 0; step < spec.steps; ++step) {
        // Recompute t from the step index so the last step lands on t_end.
        const double t = spec.t_start + static_cast<double>(step) * h;
        field(std::span<const double>(x), t, std::span<double>(k1));
        switch (spec.method) {
        case OdeMethod::euler:
            for (std::size_t i = 0; i < n; ++i) x[i] += h * k1[i];
            break;
        case OdeMethod::heun:
            axpy(x, h, k1, tmp);
            field(std::span<const double>(tmp), t + h, std::span<double>(k2));
            for (std::size_t i = 0; i < n; ++i) x[i] += 0.5 * h * (k1[i] + k2[i]);
            break;
        case OdeMethod::rk4:
            axpy(x, 0.5 * h, k1, tmp);
            field(std::span<const double>(tmp), t + 0.5 * h, std::span<double>(k2));
            axpy(x, 0.5 * h, k2, tmp);
            field(std::span<const double>(tmp), t + 0.5 * h, std::span<double>(k3));
            axpy(x, h, k3, tmp);
            field(std::span<const double>(tmp), t + h, std::span<double>(k4));
            for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            break;
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(x[i]))
                throw OdeError("non-finite state at step " + std::to_string(step + 1) + ", component " + std::to_string(i),
                               step + 1);
    }
    return x;
}

} // namespace piff
