#pragma once

// Image-space, depth-space and categorical verification scores.
//
// L1 / L-inf are computed on rendered gray levels (1 level = 1 cm, saturating
// at 2.55 m). MAE / MD are in meters. Categorical scores classify a cell as
// flooded when depth >= threshold.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "piff/error.hpp"
#include "piff/grid.hpp"
#include "piff/textio.hpp"

namespace piff {

struct ImageMetrics {
    double l1 = 0.0;
    double linf = 0.0;
};

struct FloodMetrics {
    double mae = 0.0;
    double md = 0.0;
};

struct ConfusionCounts {
    std::size_t a = 0; // hits
    std::size_t b = 0; // misses
    std::size_t c = 0; // false alarms
    std::size_t d = 0; // correct negatives

    std::size_t total() const { return a + b + c + d; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Scores with a zero denominator are std::nullopt.
struct CategoricalScores {
    ConfusionCounts counts;
    std::optional<double> pod, far, bias, csi, accuracy;
};

struct ScoreReport {
    ImageMetrics image;
    FloodMetrics flood;
    CategoricalScores categorical;
};

namespace detail {

inline void check_pair(const FloodMap& truth, const FloodMap& pred) {
    if (!truth.geom.same_shape(pred.geom) || truth.depths.size() != pred.depths.size())
        throw MetricsError("truth is " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) +
                           " but prediction is " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()));
    if (truth.depths.empty()) throw MetricsError("cannot score empty maps");
}

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace detail

inline ImageMetrics image_metrics(const FloodMap& truth, const FloodMap& pred) {
    detail::check_pair(truth, pred);
    ImageMetrics m;
    long long sum = 0;
    int worst = 0;
    for (std::size_t i = 0; i < truth.depths.size(); ++i) {
        const int d = std::abs(static_cast<int>(depth_to_pixel(truth.depths[i])) -
                               static_cast<int>(depth_to_pixel(pred.depths[i])));
        sum += d;
        worst = std::max(worst, d);
    }
    m.l1 = static_cast<double>(sum) / static_cast<double>(truth.depths.size());
    m.linf = worst;
    return m;
}

inline FloodMetrics flood_metrics(const FloodMap& truth, const FloodMap& pred) {
    detail::check_pair(truth, pred);
    FloodMetrics m;
    double sum = 0.0;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < truth.depths.size(); ++i) {
        sum += std::abs(truth.depths[i] - pred.depths[i]);
        if (truth.depths[i] > truth.depths[peak]) peak = i; // strict: first row-major argmax wins ties
    }
    m.mae = sum / static_cast<double>(truth.depths.size());
    m.md = std::abs(truth.depths[peak] - pred.depths[peak]);
    return m;
}

inline CategoricalScores categorical_scores(const FloodMap& truth, const FloodMap& pred, double threshold = 0.30) {
    detail::check_pair(truth, pred);
    if (!(threshold > 0.0)) throw MetricsError("flood threshold must be positive");
    CategoricalScores s;
    auto& k = s.counts;
    for (std::size_t i = 0; i < truth.depths.size(); ++i) {
        const bool obs = truth.depths[i] >= threshold;
        const bool fc = pred.depths[i] >= threshold;
        if (obs && fc) ++k.a;
        else if (obs) ++k.b;
        else if (fc) ++k.c;
        else ++k.d;
    }
    s.pod = detail::ratio(k.a, k.a + k.b);
    s.far = detail::ratio(k.c, k.a + k.c);
    s.bias = detail::ratio(k.a + k.c, k.a + k.b);
    s.csi = detail::ratio(k.a, k.a + k.b + k.c);
    s.accuracy = detail::ratio(k.a + k.d, k.total());
    return s;
}

inline ScoreReport score(const FloodMap& truth, const FloodMap& pred, double threshold = 0.30) {
    return ScoreReport{image_metrics(truth, pred), flood_metrics(truth, pred), categorical_scores(truth, pred, threshold)};
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_score(const std::optional<double>& v) {
    return v ? textio::format_double(*v) : std::string("undefined");
}

/// One flat key=value block.
inline std::string to_key_values(const ScoreReport& r, const std::string& name) {
    std::ostringstream os;
    const auto& k = r.categorical.counts;
    os << "[" << name << "]\n"
       << "l1=" << textio::format_double(r.image.l1) << '\n'
       << "linf=" << textio::format_double(r.image.linf) << '\n'
       << "mae=" << textio::format_double(r.flood.mae) << '\n'
       << "md=" << textio::format_double(r.flood.md) << '\n'
       << "hits=" << k.a << '\n'
       << "misses=" << k.b << '\n'
       << "false_alarms=" << k.c << '\n'
       << "correct_negatives=" << k.d << '\n'
       << "pod=" << format_score(r.categorical.pod) << '\n'
       << "far=" << format_score(r.categorical.far) << '\n'
       << "bias=" << format_score(r.categorical.bias) << '\n'
       << "csi=" << format_score(r.categorical.csi) << '\n'
       << "accuracy=" << format_score(r.categorical.accuracy) << '\n';
    return os.str();
}

inline std::string csv_header() { return "name,l1,linf,mae,md,hits,misses,false_alarms,correct_negatives,pod,far,bias,csi,accuracy"; }

inline std::string to_csv_row(const ScoreReport& r, const std::string& name) {
    std::ostringstream os;
    const auto& k = r.categorical.counts;
    os << name << ',' << textio::format_double(r.image.l1) << ',' << textio::format_double(r.image.linf) << ','
       << textio::format_double(r.flood.mae) << ',' << textio::format_double(r.flood.md) << ',' << k.a << ',' << k.b
       << ',' << k.c << ',' << k.d << ',' << format_score(r.categorical.pod) << ','
       << format_score(r.categorical.far) << ',' << format_score(r.categorical.bias) << ','
       << format_score(r.categorical.csi) << ',' << format_score(r.categorical.accuracy);
    return os.str();
}

/// Running means over many reports; categorical means skip undefined scores.
struct ScoreAggregate {
    std::size_t count = 0;
    double l1 = 0, linf = 0, mae = 0, md = 0;
    struct Mean {
        double sum = 0.0;
        std::size_t n = 0;
        void add(const std::optional<double>& v) {
            if (v) {
                sum += *v;
                ++n;
            }
        }
        std::optional<double> value() const {
            if (n == 0) return std::nullopt;
            return sum / static_cast<double>(n);
        }
    } pod, far, bias, csi, accuracy;

    void add(const ScoreReport& r) {
        ++count;
        l1 += r.image.l1;
        linf += r.image.linf;
        mae += r.flood.mae;
        md += r.flood.md;
        pod.add(r.categorical.pod);
        far.add(r.categorical.far);
        bias.add(r.categorical.bias);
        csi.add(r.categorical.csi);
        accuracy.add(r.categorical.accuracy);
    }

    std::string to_key_values(const std::string& name) const {
        const double n = count ? static_cast<double>(count) : 1.0;
        std::ostringstream os;
        os << "[" << name << "]\n"
           << "pairs=" << count << '\n'
           << "l1=" << textio::format_double(l1 / n) << '\n'
           << "linf=" << textio::format_double(linf / n) << '\n'
           << "mae=" << textio::format_double(mae / n) << '\n'
           << "md=" << textio::format_double(md / n) << '\n'
           << "pod=" << format_score(pod.value()) << '\n'
           << "far=" << format_score(far.value()) << '\n'
           << "bias=" << format_score(bias.value()) << '\n'
           << "csi=" << format_score(csi.value()) << '\n'
           << "accuracy=" << format_score(accuracy.value()) << '\n';
        return os.str();
    }
};

} // namespace piff
