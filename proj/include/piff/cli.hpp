#pragma once

// Command implementations behind the `piff` tool. Each command validates its
// options, performs its work and writes a short key=value summary to `log`.
// Failures surface as exceptions; the tool maps them to a non-zero exit.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "piff/checkpoint.hpp"
#include "piff/error.hpp"
#include "piff/flowmatch.hpp"
#include "piff/grid.hpp"
#include "piff/metrics.hpp"
#include "piff/odesolve.hpp"
#include "piff/rainfall.hpp"
#include "piff/spm.hpp"
#include "piff/textio.hpp"

namespace piff::cli {

namespace fs = std::filesystem;

inline constexpr const char* kMetricUnits =
    "l1/linf in gray levels (1 level = 1 cm, saturating at 2.55 m); mae/md in meters";

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool quiet = false;
};

struct RainSource {
    std::string csv;                 // path to an hour,mm CSV
    std::optional<double> total_mm;  // or a uniform storm of this total
};

inline RainfallSeries load_rain(const RainSource& src) {
    if (!src.csv.empty() && src.total_mm) throw Error("give either a rainfall CSV or --total-mm, not both");
    if (!src.csv.empty()) return load_event_csv(src.csv);
    if (src.total_mm) return gen_uniform(*src.total_mm);
    throw Error("a rainfall CSV or --total-mm is required");
}

/// Scenario category from a file name prefix ("uniform_3.csv" -> "uniform").
inline std::string name_category(const std::string& stem) {
    const auto us = stem.find('_');
    return us == std::string::npos ? stem : stem.substr(0, us);
}

inline RainCategory category_from_name(const std::string& stem) {
    const auto c = name_category(stem);
    if (c == "uniform") return RainCategory::uniform;
    if (c == "nonuniform") return RainCategory::nonuniform;
    return RainCategory::real;
}

inline std::vector<fs::path> sorted_files(const std::string& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) throw Error("not a directory: '" + dir + "'");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// Creates the parent directory of an output file and returns the path.
inline const std::string& out_path(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    return path;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(out_path(path), std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// spm

struct SpmOptions {
    std::string dem;
    RainSource rain;
    std::size_t hour = 24;
    std::string out;
    std::string render;
    SpmConfig spm;
};

inline int cmd_spm(const SpmOptions& o, const GlobalOptions& g, std::ostream& log) {
    validate(o.spm);
    const DemGrid dem = load_ascii_grid(o.dem);
    const RainfallSeries rain = load_rain(o.rain);
    const double mm = cumulative(rain, o.hour);
    const SpmResult r = spm_simulate(dem, mm / 1000.0, o.spm);
    save_ascii_grid(r.flood, out_path(o.out));
    if (!o.render.empty()) write_pgm(render_depth(r.flood), out_path(o.render));
    if (!g.quiet) {
        log << "rain_mm=" << textio::format_double(mm) << '\n'
            << "iterations=" << r.iterations << '\n'
            << "mass_error=" << textio::format_double(r.mass_error) << '\n'
            << "residual=" << textio::format_double(r.residual) << '\n'
            << "converged=" << (r.converged ? "true" : "false") << '\n';
    }
    if (!r.converged)
        throw SpmError("SPM did not converge within " + std::to_string(r.iterations) + " sweeps (residual " +
                       textio::format_double(r.residual) + " m)");
    if (r.mass_error > o.spm.tol_mass)
        throw SpmError("SPM mass error " + textio::format_double(r.mass_error) + " exceeds tolerance");
    return 0;
}

// ---------------------------------------------------------------------------
// scenarios

struct ScenarioOptions {
    std::string kind = "uniform";
    std::size_t count = 10;
    double min_mm = 24.0;
    double max_mm = 720.0;
    double peak_hour = 12.0;
    double spread = 4.0;
    std::string outdir;
};

inline int cmd_scenarios(const ScenarioOptions& o, const GlobalOptions& g, std::ostream& log) {
    if (o.kind != "uniform" && o.kind != "nonuniform")
        throw Error("scenario kind must be uniform or nonuniform, got '" + o.kind + "'");
    if (!(o.min_mm >= 0.0) || !(o.max_mm >= o.min_mm)) throw Error("need 0 <= min-mm <= max-mm");
    fs::create_directories(o.outdir);
    std::mt19937_64 rng(g.seed);
    std::uniform_real_distribution<double> total(o.min_mm, o.max_mm);
    for (std::size_t i = 0; i < o.count; ++i) {
        const double mm = o.max_mm > o.min_mm ? total(rng) : o.min_mm;
        const std::uint64_t shuffle_seed = rng();
        RainfallSeries s = o.kind == "uniform" ? gen_uniform(mm) : gen_nonuniform(mm, o.peak_hour, o.spread, shuffle_seed);
        const auto path = (fs::path(o.outdir) / (o.kind + "_" + std::to_string(i) + ".csv")).string();
        save_event_csv(s, path);
        if (!g.quiet) log << "wrote=" << path << " total_mm=" << textio::format_double(s.total()) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train

enum class TruthGenerator { spm_fine, fill };

struct TrainOptions {
    std::string corpus;
    std::vector<std::string> dems;
    std::string checkpoint;
    std::string loss_csv; // defaults to <checkpoint>.loss.csv
    CfmConfig cfm;
    nn::ModelShape shape;
    SpmConfig prior;          // SPM settings for the conditioning prior
    double truth_tol = 1e-8;  // tol_level of the reference SPM run
    TruthGenerator truth = TruthGenerator::spm_fine;
};

inline std::string truth_description(const TrainOptions& o) {
    if (o.truth == TruthGenerator::fill) return "hydrostatic_fill";
    return "spm(tol_level=" + textio::format_double(o.truth_tol) + ")";
}

/// Builds one scenario per (DEM, rainfall CSV) pair.
inline std::vector<Scenario> build_corpus(const TrainOptions& o) {
    const auto files = sorted_files(o.corpus, ".csv");
    if (files.empty()) throw Error("corpus '" + o.corpus + "' contains no rainfall CSV files");
    if (o.dems.empty()) throw Error("at least one DEM is required");
    SpmConfig fine = o.prior;
    fine.tol_level = o.truth_tol;
    std::vector<Scenario> out;
    for (const auto& dem_path : o.dems) {
        const DemGrid dem = load_ascii_grid(dem_path);
        for (const auto& f : files) {
            Scenario s;
            s.dem = dem;
            s.rain = load_event_csv(f.string());
            s.rain.category = category_from_name(f.stem().string());
            s.rain.label = f.stem().string();
            s.priors = spm_prior_sequence(dem, s.rain, o.prior);
            if (o.truth == TruthGenerator::fill) {
                for (std::size_t h = 1; h <= kHours; ++h)
                    s.truths.push_back(hydrostatic_fill(dem, cumulative(s.rain, h) / 1000.0));
            } else {
                s.truths = spm_prior_sequence(dem, s.rain, fine);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

inline int cmd_train(const TrainOptions& o, const GlobalOptions& g, std::ostream& log) {
    CfmConfig cfg = o.cfm;
    cfg.seed = g.seed;
    validate(cfg);
    validate(o.prior);
    if (!g.quiet) {
        log << "sigma=" << textio::format_double(cfg.sigma) << '\n'
            << "batch=" << cfg.batch << '\n'
            << "lr=" << textio::format_double(cfg.lr) << '\n'
            << "lr_decay=" << textio::format_double(cfg.lr_decay) << " every " << cfg.decay_every << " steps\n"
            << "iters=" << cfg.iters << '\n'
            << "seed=" << cfg.seed << '\n'
            << "truth_generator=" << truth_description(o) << '\n';
    }
    const auto corpus = build_corpus(o);
    if (!g.quiet) log << "scenarios=" << corpus.size() << '\n';
    const TrainResult r = train(corpus, cfg, o.shape);

    Checkpoint ck{r.model, cfg, {{"truth_generator", truth_description(o)}}};
    save_checkpoint(ck, out_path(o.checkpoint));
    std::ostringstream loss;
    loss << "iter,loss\n";
    for (std::size_t i = 0; i < r.losses.size(); ++i) loss << i << ',' << textio::format_double(r.losses[i]) << '\n';
    write_text(o.loss_csv.empty() ? o.checkpoint + ".loss.csv" : o.loss_csv, loss.str());
    if (!g.quiet && !r.losses.empty())
        log << "final_loss=" << textio::format_double(r.losses.back()) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleOptions {
    std::string checkpoint;
    std::string dem;
    RainSource rain;
    std::size_t hour = 24;
    OdeMethod sampler = OdeMethod::euler;
    std::size_t steps = 50;
    std::optional<OdeMethod> compare;
    std::string out;
    std::string render;
    SpmConfig prior;
};

inline int cmd_sample(const SampleOptions& o, const GlobalOptions& g, std::ostream& log) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const DemGrid dem = load_ascii_grid(o.dem);
    const RainfallSeries rain = load_rain(o.rain);
    const FloodMap prior = spm_flood(dem, cumulative(rain, o.hour) / 1000.0, o.prior);

    OdeSpec spec{1.0, 0.0, o.steps, o.sampler};
    validate(spec);
    const auto t0 = std::chrono::steady_clock::now();
    const FloodMap pred = sample_flood(ck.model, dem, rain, o.hour, prior, spec);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_ascii_grid(pred, out_path(o.out));
    if (!o.render.empty()) write_pgm(render_depth(pred), out_path(o.render));
    if (!g.quiet) {
        log << "sampler=" << to_string(o.sampler) << '\n'
            << "steps=" << o.steps << '\n'
            << "seconds=" << secs << '\n';
    }
    if (o.compare) {
        OdeSpec other = spec;
        other.method = *o.compare;
        const FloodMap alt = sample_flood(ck.model, dem, rain, o.hour, prior, other);
        const auto im = image_metrics(pred, alt);
        if (!g.quiet)
            log << "compare_sampler=" << to_string(*o.compare) << '\n'
                << "compare_l1=" << textio::format_double(im.l1) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
    std::string truth_dir;
    std::string pred_dir;
    std::string report;
    std::string csv;
    double threshold_cm = 30.0;
    std::size_t workers = 1;
    std::string truth_label = "unspecified"; // how the reference maps were produced
};

inline int cmd_eval(const EvalOptions& o, const GlobalOptions& g, std::ostream& log) {
    if (!(o.threshold_cm > 0.0)) throw Error("threshold must be positive");
    const auto files = sorted_files(o.truth_dir, ".asc");
    if (files.empty()) throw Error("no .asc files in '" + o.truth_dir + "'");
    std::vector<ScoreReport> reports(files.size());
    parallel_blocks(o.workers, files.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto& tp = files[i];
            const auto pp = fs::path(o.pred_dir) / tp.filename();
            const FloodMap truth = load_flood_grid(tp.string());
            const FloodMap pred = load_flood_grid(pp.string());
            try {
                reports[i] = score(truth, pred, o.threshold_cm / 100.0);
            } catch (const MetricsError& err) {
                throw MetricsError("pair '" + tp.filename().string() + "': " + err.what());
            }
        }
    });

    std::ostringstream rep, csv;
    rep << "# metric_units=" << kMetricUnits << '\n'
        << "# threshold_m=" << textio::format_double(o.threshold_cm / 100.0) << '\n'
        << "# truth_generator=" << o.truth_label << '\n';
    csv << csv_header() << '\n';
    std::map<std::string, ScoreAggregate> groups;
    ScoreAggregate all;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto stem = files[i].stem().string();
        rep << to_key_values(reports[i], stem) << '\n';
        csv << to_csv_row(reports[i], stem) << '\n';
        groups[name_category(stem)].add(reports[i]);
        all.add(reports[i]);
    }
    for (const auto& [name, agg] : groups) rep << agg.to_key_values("aggregate:" + name) << '\n';
    rep << all.to_key_values("aggregate:all");
    write_text(o.report, rep.str());
    if (!o.csv.empty()) write_text(o.csv, csv.str());
    if (!g.quiet) log << "pairs=" << files.size() << '\n' << "mean_l1=" << textio::format_double(all.l1 / all.count) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// dem (synthetic terrain helper)

struct DemOptions {
    std::string kind = "bowl";
    std::size_t rows = 16;
    std::size_t cols = 16;
    SynthParams params;
    std::string out;
};

inline int cmd_dem(const DemOptions& o, const GlobalOptions& g, std::ostream& log) {
    const DemGrid dem = synth_dem(parse_synth_kind(o.kind), o.rows, o.cols, o.params, g.seed);
    save_ascii_grid(dem, out_path(o.out));
    if (!g.quiet) log << "wrote=" << o.out << '\n';
    return 0;
}

} // namespace piff::cli
