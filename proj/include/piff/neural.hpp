#pragma once

// Trainable velocity-field approximator with exact reverse-mode gradients.
//
// Rainfall encoder: each hour's (scaled) rainfall is lifted to embed_dim,
// a learned positional embedding is added, one single-head scaled
// dot-product self-attention layer with a residual connection is applied,
// and the 24 outputs are mean-pooled into the embedding.
//
// Field network: a per-pixel MLP (tanh, tanh, linear) over the 3x3
// neighborhood of all input channels with zero padding. Channels are
// [x_t, t, dem, spm, embedding...]; t and the embedding are constant over
// the grid, which lets the first layer fold them into one precomputed term
// per neighborhood offset.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "piff/error.hpp"
#include "piff/rainfall.hpp"

namespace piff::nn {

inline constexpr std::size_t kSeq = kHours;
inline constexpr std::size_t kTaps = 9; // 3x3 neighborhood offsets

struct ModelShape {
    std::size_t embed_dim = 8;
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 32;

    std::size_t channels() const { return 4 + embed_dim; }
    bool operator==(const ModelShape&) const = default;
};

enum class Channel : std::size_t { x_t = 0, t = 1, dem = 2, spm = 3, embed = 4 };

/// Offsets of each named parameter array inside the flat parameter vector.
struct Layout {
    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset = 0;
        std::size_t size = 0;
    };

    std::size_t enc_w_in, enc_b_in, enc_pos, enc_wq, enc_wk, enc_wv, enc_wo;
    std::size_t w1, b1, w2, b2, w3, b3;
    std::size_t total = 0;
    std::vector<Entry> entries;

    explicit Layout(const ModelShape& s) {
        const std::size_t E = s.embed_dim, H1 = s.hidden1, H2 = s.hidden2, C = s.channels();
        auto add = [&](std::string name, std::vector<std::size_t> shape) {
            std::size_t n = 1;
            for (auto d : shape) n *= d;
            entries.push_back({std::move(name), std::move(shape), total, n});
            total += n;
            return entries.back().offset;
        };
        enc_w_in = add("encoder.w_in", {E});
        enc_b_in = add("encoder.b_in", {E});
        enc_pos = add("encoder.pos", {kSeq, E});
        enc_wq = add("encoder.wq", {E, E});
        enc_wk = add("encoder.wk", {E, E});
        enc_wv = add("encoder.wv", {E, E});
        enc_wo = add("encoder.wo", {E, E});
        w1 = add("field.w1", {H1, kTaps, C});
        b1 = add("field.b1", {H1});
        w2 = add("field.w2", {H2, H1});
        b2 = add("field.b2", {H2});
        w3 = add("field.w3", {H2});
        b3 = add("field.b3", {1});
    }
};

struct Model {
    ModelShape shape;
    std::vector<double> params;

    Model() : Model(ModelShape{}) {}
    explicit Model(const ModelShape& s) : shape(s), params(Layout(s).total, 0.0) {}

    Layout layout() const { return Layout(shape); }
    std::size_t param_count() const { return params.size(); }
    bool operator==(const Model&) const = default;
};

/// Seeded uniform initialization in [-scale, scale].
inline Model init_model(const ModelShape& shape, std::uint64_t seed, double scale = 0.1) {
    Model m(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& p : m.params) p = u(rng);
    return m;
}

inline void validate(const Model& m) {
    if (m.shape.embed_dim < 1 || m.shape.hidden1 < 1 || m.shape.hidden2 < 1)
        throw ModelError("model dimensions must be positive");
    if (m.params.size() != Layout(m.shape).total) throw ModelError("parameter count does not match model shape");
    for (double p : m.params)
        if (!std::isfinite(p)) throw ModelError("non-finite model parameter");
}

// ---------------------------------------------------------------------------
// Rainfall encoder

using SeriesInput = std::array<double, kSeq>;

struct EncoderCache {
    SeriesInput input{};
    std::vector<double> x, q, k, v, attn, o; // kSeq x E, attn kSeq x kSeq
    bool valid = false;
};

inline std::vector<double> encode_rainfall(const Model& m, const SeriesInput& series, EncoderCache* cache = nullptr) {
    const Layout L(m.shape);
    const std::size_t E = m.shape.embed_dim;
    const double* P = m.params.data();
    EncoderCache local;
    EncoderCache& c = cache ? *cache : local;
    c.input = series;
    c.x.assign(kSeq * E, 0.0);
    c.q.assign(kSeq * E, 0.0);
    c.k.assign(kSeq * E, 0.0);
    c.v.assign(kSeq * E, 0.0);
    c.o.assign(kSeq * E, 0.0);
    c.attn.assign(kSeq * kSeq, 0.0);

    for (std::size_t i = 0; i < kSeq; ++i)
        for (std::size_t e = 0; e < E; ++e)
            c.x[i * E + e] = series[i] * P[L.enc_w_in + e] + P[L.enc_b_in + e] + P[L.enc_pos + i * E + e];

    auto project = [&](std::size_t w, std::vector<double>& dst) {
        for (std::size_t i = 0; i < kSeq; ++i)
            for (std::size_t b = 0; b < E; ++b) {
                const double xb = c.x[i * E + b];
                for (std::size_t a = 0; a < E; ++a) dst[i * E + a] += xb * P[w + b * E + a];
            }
    };
    project(L.enc_wq, c.q);
    project(L.enc_wk, c.k);
    project(L.enc_wv, c.v);

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(E));
    for (std::size_t i = 0; i < kSeq; ++i) {
        double* row = &c.attn[i * kSeq];
        double mx = -INFINITY;
        for (std::size_t j = 0; j < kSeq; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < E; ++a) s += c.q[i * E + a] * c.k[j * E + a];
            row[j] = s * inv_sqrt;
            mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < kSeq; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < kSeq; ++j) row[j] /= z;
        for (std::size_t j = 0; j < kSeq; ++j)
            for (std::size_t a = 0; a < E; ++a) c.o[i * E + a] += row[j] * c.v[j * E + a];
    }

    std::vector<double> emb(E, 0.0);
    for (std::size_t i = 0; i < kSeq; ++i) {
        for (std::size_t a = 0; a < E; ++a) {
            double y = c.x[i * E + a];
            for (std::size_t b = 0; b < E; ++b) y += c.o[i * E + b] * P[L.enc_wo + b * E + a];
            emb[a] += y;
        }
    }
    for (double& v : emb) v /= static_cast<double>(kSeq);
    c.valid = true;
    return emb;
}

/// Accumulates d(embedding)/d(params) . d_emb into grad; optionally writes
/// the gradient with respect to the 24 scaled rainfall inputs.
inline void encoder_backward(const Model& m, const EncoderCache& c, std::span<const double> d_emb,
                             std::span<double> grad, SeriesInput* d_series = nullptr) {
    if (!c.valid) throw ModelError("encoder backward called without a forward cache");
    const Layout L(m.shape);
    const std::size_t E = m.shape.embed_dim;
    const double* P = m.params.data();
    double* G = grad.data();
    const double inv_n = 1.0 / static_cast<double>(kSeq);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(E));

    std::vector<double> dx(kSeq * E), dq(kSeq * E, 0.0), dk(kSeq * E, 0.0), dv(kSeq * E, 0.0), d_o(kSeq * E, 0.0);
    // Residual path and output projection: every position receives d_emb / 24.
    for (std::size_t i = 0; i < kSeq; ++i)
        for (std::size_t a = 0; a < E; ++a) dx[i * E + a] = d_emb[a] * inv_n;
    for (std::size_t i = 0; i < kSeq; ++i)
        for (std::size_t b = 0; b < E; ++b) {
            double acc = 0.0;
            for (std::size_t a = 0; a < E; ++a) {
                const double dy = d_emb[a] * inv_n;
                G[L.enc_wo + b * E + a] += c.o[i * E + b] * dy;
                acc += P[L.enc_wo + b * E + a] * dy;
            }
            d_o[i * E + b] = acc;
        }

    std::array<double, kSeq> da{}, ds{};
    for (std::size_t i = 0; i < kSeq; ++i) {
        const double* row = &c.attn[i * kSeq];
        double dot = 0.0;
        for (std::size_t j = 0; j < kSeq; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < E; ++a) {
                s += d_o[i * E + a] * c.v[j * E + a];
                dv[j * E + a] += row[j] * d_o[i * E + a];
            }
            da[j] = s;
            dot += row[j] * s;
        }
        for (std::size_t j = 0; j < kSeq; ++j) ds[j] = row[j] * (da[j] - dot) * inv_sqrt;
        for (std::size_t j = 0; j < kSeq; ++j)
            for (std::size_t a = 0; a < E; ++a) {
                dq[i * E + a] += ds[j] * c.k[j * E + a];
                dk[j * E + a] += ds[j] * c.q[i * E + a];
            }
    }

    auto project_back = [&](std::size_t w, const std::vector<double>& dproj) {
        for (std::size_t i = 0; i < kSeq; ++i)
            for (std::size_t b = 0; b < E; ++b) {
                double acc = 0.0;
                for (std::size_t a = 0; a < E; ++a) {
                    G[w + b * E + a] += c.x[i * E + b] * dproj[i * E + a];
                    acc += P[w + b * E + a] * dproj[i * E + a];
                }
                dx[i * E + b] += acc;
            }
    };
    project_back(L.enc_wq, dq);
    project_back(L.enc_wk, dk);
    project_back(L.enc_wv, dv);

    for (std::size_t i = 0; i < kSeq; ++i) {
        double dsi = 0.0;
        for (std::size_t e = 0; e < E; ++e) {
            const double d = dx[i * E + e];
            G[L.enc_w_in + e] += c.input[i] * d;
            G[L.enc_b_in + e] += d;
            G[L.enc_pos + i * E + e] += d;
            dsi += P[L.enc_w_in + e] * d;
        }
        if (d_series) (*d_series)[i] = dsi;
    }
}

// ---------------------------------------------------------------------------
// Field network

struct FieldInput {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<const double> x_t;
    double t = 0.0;
    std::span<const double> dem;
    std::span<const double> spm;
    std::span<const double> embedding;
};

struct FieldCache {
    std::size_t rows = 0, cols = 0;
    std::vector<double> x_t, dem, spm;
    double t = 0.0;
    std::vector<double> embedding;
    std::vector<double> a1, a2; // activations per pixel
    bool valid = false;
};

struct InputGrads {
    std::vector<double> x_t, dem, spm;
    double t = 0.0;
    std::vector<double> embedding;
};

namespace detail {

inline constexpr std::array<std::size_t, 3> kSpatial = {0, 2, 3};

inline bool tap_valid(std::size_t r, std::size_t c, std::size_t tap, std::size_t rows, std::size_t cols,
                      std::size_t& q) {
    const long long rr = static_cast<long long>(r) + static_cast<long long>(tap / 3) - 1;
    const long long cc = static_cast<long long>(c) + static_cast<long long>(tap % 3) - 1;
    if (rr < 0 || cc < 0 || rr >= static_cast<long long>(rows) || cc >= static_cast<long long>(cols)) return false;
    q = static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc);
    return true;
}

/// First-layer weights regrouped for the inner loops: spatial weights as
/// [tap][spatial channel][hidden] and the constant-channel term per [tap][hidden].
struct FirstLayer {
    std::vector<double> wsp;
    std::vector<double> gconst;
    std::vector<double> cvals;

    FirstLayer(const Model& m, const Layout& L, double t, std::span<const double> emb) {
        const std::size_t H1 = m.shape.hidden1, C = m.shape.channels(), E = m.shape.embed_dim;
        const double* W = m.params.data() + L.w1;
        cvals.assign(C, 0.0);
        cvals[static_cast<std::size_t>(Channel::t)] = t;
        for (std::size_t e = 0; e < E; ++e) cvals[static_cast<std::size_t>(Channel::embed) + e] = emb[e];
        wsp.assign(kTaps * 3 * H1, 0.0);
        gconst.assign(kTaps * H1, 0.0);
        for (std::size_t h = 0; h < H1; ++h)
            for (std::size_t o = 0; o < kTaps; ++o) {
                const double* w = W + (h * kTaps + o) * C;
                for (std::size_t s = 0; s < 3; ++s) wsp[(o * 3 + s) * H1 + h] = w[kSpatial[s]];
                double g = 0.0;
                for (std::size_t ch = 0; ch < C; ++ch) g += w[ch] * cvals[ch];
                gconst[o * H1 + h] = g; // spatial entries of cvals are zero
            }
    }
};

inline void check_input(const Model& m, const FieldInput& in) {
    const std::size_t P = in.rows * in.cols;
    if (P == 0) throw ModelError("field input grid is empty");
    if (in.x_t.size() != P || in.dem.size() != P || in.spm.size() != P)
        throw ModelError("field input channels do not share the grid shape");
    if (in.embedding.size() != m.shape.embed_dim) throw ModelError("embedding size does not match the model");
}

} // namespace detail

inline std::vector<double> field_forward(const Model& m, const FieldInput& in, FieldCache* cache = nullptr) {
    detail::check_input(m, in);
    const Layout L(m.shape);
    const std::size_t H1 = m.shape.hidden1, H2 = m.shape.hidden2;
    const std::size_t rows = in.rows, cols = in.cols, P = rows * cols;
    const double* prm = m.params.data();
    const detail::FirstLayer first(m, L, in.t, in.embedding);
    const std::array<const double*, 3> chan = {in.x_t.data(), in.dem.data(), in.spm.data()};

    if (cache) {
        cache->rows = rows;
        cache->cols = cols;
        cache->x_t.assign(in.x_t.begin(), in.x_t.end());
        cache->dem.assign(in.dem.begin(), in.dem.end());
        cache->spm.assign(in.spm.begin(), in.spm.end());
        cache->t = in.t;
        cache->embedding.assign(in.embedding.begin(), in.embedding.end());
        cache->a1.assign(P * H1, 0.0);
        cache->a2.assign(P * H2, 0.0);
        cache->valid = true;
    }

    std::vector<double> out(P);
    std::vector<double> z1(H1), a2(H2);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t p = r * cols + c;
            for (std::size_t h = 0; h < H1; ++h) z1[h] = prm[L.b1 + h];
            for (std::size_t o = 0; o < kTaps; ++o) {
                std::size_t q;
                if (!detail::tap_valid(r, c, o, rows, cols, q)) continue;
                const double v0 = chan[0][q], v1 = chan[1][q], v2 = chan[2][q];
                const double* g = &first.gconst[o * H1];
                const double* w0 = &first.wsp[(o * 3 + 0) * H1];
                const double* w1 = &first.wsp[(o * 3 + 1) * H1];
                const double* w2 = &first.wsp[(o * 3 + 2) * H1];
                for (std::size_t h = 0; h < H1; ++h) z1[h] += g[h] + w0[h] * v0 + w1[h] * v1 + w2[h] * v2;
            }
            for (std::size_t h = 0; h < H1; ++h) z1[h] = std::tanh(z1[h]);
            double y = prm[L.b3];
            for (std::size_t k = 0; k < H2; ++k) {
                const double* w = prm + L.w2 + k * H1;
                double s = prm[L.b2 + k];
                for (std::size_t h = 0; h < H1; ++h) s += w[h] * z1[h];
                a2[k] = std::tanh(s);
                y += prm[L.w3 + k] * a2[k];
            }
            out[p] = y;
            if (cache) {
                std::copy(z1.begin(), z1.end(), cache->a1.begin() + static_cast<std::ptrdiff_t>(p * H1));
                std::copy(a2.begin(), a2.end(), cache->a2.begin() + static_cast<std::ptrdiff_t>(p * H2));
            }
        }
    return out;
}

/// Accumulates parameter gradients of sum_p upstream[p] * out[p] into grad.
/// The embedding gradient is always produced (the encoder needs it); the
/// per-cell input gradients only when `want_spatial` is set.
inline InputGrads field_backward(const Model& m, const FieldCache& c, std::span<const double> upstream,
                                 std::span<double> grad, bool want_spatial = false) {
    if (!c.valid) throw ModelError("field backward called without a forward cache");
    const Layout L(m.shape);
    const std::size_t H1 = m.shape.hidden1, H2 = m.shape.hidden2, C = m.shape.channels();
    const std::size_t rows = c.rows, cols = c.cols, P = rows * cols;
    if (upstream.size() != P) throw ModelError("upstream gradient does not match the grid");
    const double* prm = m.params.data();
    double* G = grad.data();
    const detail::FirstLayer first(m, L, c.t, c.embedding);
    const std::array<const double*, 3> chan = {c.x_t.data(), c.dem.data(), c.spm.data()};

    InputGrads ig;
    if (want_spatial) {
        ig.x_t.assign(P, 0.0);
        ig.dem.assign(P, 0.0);
        ig.spm.assign(P, 0.0);
    }
    std::array<double*, 3> dchan = {ig.x_t.data(), ig.dem.data(), ig.spm.data()};

    std::vector<double> dwsp(kTaps * 3 * H1, 0.0), tap_sum(kTaps * H1, 0.0);
    std::vector<double> dz2(H2), dz1(H1);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t col = 0; col < cols; ++col) {
            const std::size_t p = r * cols + col;
            const double dout = upstream[p];
            if (dout == 0.0) continue;
            const double* a1 = &c.a1[p * H1];
            const double* a2 = &c.a2[p * H2];
            G[L.b3] += dout;
            std::fill(dz1.begin(), dz1.end(), 0.0);
            for (std::size_t k = 0; k < H2; ++k) {
                G[L.w3 + k] += dout * a2[k];
                dz2[k] = dout * prm[L.w3 + k] * (1.0 - a2[k] * a2[k]);
                G[L.b2 + k] += dz2[k];
                double* gw = G + L.w2 + k * H1;
                const double* w = prm + L.w2 + k * H1;
                for (std::size_t h = 0; h < H1; ++h) {
                    gw[h] += dz2[k] * a1[h];
                    dz1[h] += w[h] * dz2[k];
                }
            }
            for (std::size_t h = 0; h < H1; ++h) {
                dz1[h] *= 1.0 - a1[h] * a1[h];
                G[L.b1 + h] += dz1[h];
            }
            for (std::size_t o = 0; o < kTaps; ++o) {
                std::size_t q;
                if (!detail::tap_valid(r, col, o, rows, cols, q)) continue;
                double* ts = &tap_sum[o * H1];
                for (std::size_t h = 0; h < H1; ++h) ts[h] += dz1[h];
                for (std::size_t s = 0; s < 3; ++s) {
                    const double v = chan[s][q];
                    double* dw = &dwsp[(o * 3 + s) * H1];
                    for (std::size_t h = 0; h < H1; ++h) dw[h] += dz1[h] * v;
                    if (want_spatial) {
                        const double* w = &first.wsp[(o * 3 + s) * H1];
                        double acc = 0.0;
                        for (std::size_t h = 0; h < H1; ++h) acc += w[h] * dz1[h];
                        dchan[s][q] += acc;
                    }
                }
            }
        }

    std::vector<double> dconst(C, 0.0);
    const double* W = prm + L.w1;
    double* GW = G + L.w1;
    for (std::size_t h = 0; h < H1; ++h)
        for (std::size_t o = 0; o < kTaps; ++o) {
            const std::size_t base = (h * kTaps + o) * C;
            const double ts = tap_sum[o * H1 + h];
            for (std::size_t s = 0; s < 3; ++s) GW[base + detail::kSpatial[s]] += dwsp[(o * 3 + s) * H1 + h];
            for (std::size_t ch = 0; ch < C; ++ch) {
                if (ch == 0 || ch == 2 || ch == 3) continue;
                GW[base + ch] += first.cvals[ch] * ts;
                dconst[ch] += W[base + ch] * ts;
            }
        }
    ig.t = dconst[static_cast<std::size_t>(Channel::t)];
    ig.embedding.assign(dconst.begin() + static_cast<std::ptrdiff_t>(Channel::embed), dconst.end());
    return ig;
}

// ---------------------------------------------------------------------------
// Composite encoder + field model

struct ModelInput {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<const double> x_t;
    double t = 0.0;
    std::span<const double> dem;
    std::span<const double> spm;
    SeriesInput series{};
};

struct ForwardCache {
    EncoderCache encoder;
    FieldCache field;
};

struct Gradients {
    std::vector<double> params;
    InputGrads inputs;
    SeriesInput series{};
};

inline std::vector<double> forward(const Model& m, const ModelInput& in, ForwardCache* cache = nullptr) {
    const auto emb = encode_rainfall(m, in.series, cache ? &cache->encoder : nullptr);
    return field_forward(m, FieldInput{in.rows, in.cols, in.x_t, in.t, in.dem, in.spm, emb},
                         cache ? &cache->field : nullptr);
}

/// Accumulates the parameter gradient of sum_p upstream[p] * out[p] into grad
/// and returns the input gradients.
inline Gradients backward_into(const Model& m, const ForwardCache& cache, std::span<const double> upstream,
                               std::span<double> grad, bool want_inputs = false) {
    if (grad.size() != m.param_count()) throw ModelError("gradient buffer does not match the model");
    Gradients g;
    g.inputs = field_backward(m, cache.field, upstream, grad, want_inputs);
    encoder_backward(m, cache.encoder, g.inputs.embedding, grad, &g.series);
    return g;
}

inline Gradients backward(const Model& m, const ForwardCache& cache, std::span<const double> upstream) {
    std::vector<double> grad(m.param_count(), 0.0);
    Gradients g = backward_into(m, cache, upstream, grad, true);
    g.params = std::move(grad);
    return g;
}

} // namespace piff::nn
