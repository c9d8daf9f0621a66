// piff: command-line front end for SPM runs, scenario generation, training,
// sampling and evaluation.

#include <iostream>

#include <CLI11.hpp>

#include "piff/cli.hpp"

namespace {

void add_spm_flags(CLI::App* cmd, piff::SpmConfig& spm) {
    cmd->add_option("--phi", spm.phi, "Transfer fraction per sweep")->capture_default_str();
    cmd->add_option("--tol-level", spm.tol_level, "Convergence tolerance on per-cell change and wet surface drop (m)")->capture_default_str();
    cmd->add_option("--tol-mass", spm.tol_mass, "Relative mass-balance tolerance")->capture_default_str();
    cmd->add_option("--max-iters", spm.max_iters, "Maximum sweeps")->capture_default_str();
    cmd->add_option("--workers", spm.workers, "Row-band workers per sweep")->capture_default_str();
}

piff::OdeMethod method_of(const std::string& s) { return piff::parse_ode_method(s); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed flow-matching flood mapping"};
    app.require_subcommand(1);
    app.fallthrough();
    piff::cli::GlobalOptions global;
    app.add_option("--seed", global.seed, "Random seed")->capture_default_str();
    app.add_flag("--quiet", global.quiet, "Suppress summaries");

    // spm
    piff::cli::SpmOptions spm;
    double spm_total = -1.0;
    auto* c_spm = app.add_subcommand("spm", "Run the simplified inundation model");
    c_spm->add_option("--dem", spm.dem, "DEM ASCII grid")->required();
    c_spm->add_option("--rainfall", spm.rain.csv, "Rainfall CSV (hour,mm)");
    c_spm->add_option("--total-mm", spm_total, "Uniform 24 h rainfall total instead of a CSV");
    c_spm->add_option("--hour", spm.hour, "Use cumulative rainfall through this hour")->capture_default_str();
    c_spm->add_option("--out", spm.out, "Output flood grid")->required();
    c_spm->add_option("--render", spm.render, "Optional PGM render");
    c_spm->add_flag("--literal", spm.spm.literal_rule, "Compare against bare neighbor elevation");
    add_spm_flags(c_spm, spm.spm);

    // scenarios
    piff::cli::ScenarioOptions sc;
    auto* c_sc = app.add_subcommand("scenarios", "Generate rainfall scenario CSVs");
    c_sc->add_option("--kind", sc.kind, "uniform or nonuniform")->capture_default_str();
    c_sc->add_option("--count", sc.count, "Number of files")->capture_default_str();
    c_sc->add_option("--min-mm", sc.min_mm, "Smallest 24 h total")->capture_default_str();
    c_sc->add_option("--max-mm", sc.max_mm, "Largest 24 h total")->capture_default_str();
    c_sc->add_option("--peak-hour", sc.peak_hour, "Gaussian peak hour (nonuniform)")->capture_default_str();
    c_sc->add_option("--spread", sc.spread, "Gaussian spread in hours (nonuniform)")->capture_default_str();
    c_sc->add_option("--outdir", sc.outdir, "Output directory")->required();

    // train
    piff::cli::TrainOptions tr;
    std::string truth = "spm";
    auto* c_tr = app.add_subcommand("train", "Train the flow-matching model");
    c_tr->add_option("--corpus", tr.corpus, "Directory of rainfall CSVs")->required();
    c_tr->add_option("--dem", tr.dems, "DEM grid(s); every DEM is paired with every CSV")->required();
    c_tr->add_option("--checkpoint", tr.checkpoint, "Checkpoint output path")->required();
    c_tr->add_option("--loss-csv", tr.loss_csv, "Loss history CSV (default <checkpoint>.loss.csv)");
    c_tr->add_option("--iters", tr.cfm.iters, "Training iterations")->capture_default_str();
    c_tr->add_option("--batch", tr.cfm.batch, "Batch size")->capture_default_str();
    c_tr->add_option("--sigma", tr.cfm.sigma, "Path noise standard deviation")->capture_default_str();
    c_tr->add_option("--lr", tr.cfm.lr, "Initial learning rate")->capture_default_str();
    c_tr->add_option("--lr-decay", tr.cfm.lr_decay, "Learning-rate decay factor")->capture_default_str();
    c_tr->add_option("--decay-every", tr.cfm.decay_every, "Steps between decays")->capture_default_str();
    c_tr->add_option("--workers", tr.cfm.workers, "Per-sample workers")->capture_default_str();
    c_tr->add_option("--embed-dim", tr.shape.embed_dim, "Rainfall embedding width")->capture_default_str();
    c_tr->add_option("--hidden1", tr.shape.hidden1, "First hidden layer width")->capture_default_str();
    c_tr->add_option("--hidden2", tr.shape.hidden2, "Second hidden layer width")->capture_default_str();
    c_tr->add_option("--truth", truth, "Reference generator: spm or fill")->capture_default_str();
    c_tr->add_option("--truth-tol", tr.truth_tol, "tol_level of the reference SPM run")->capture_default_str();

    // sample
    piff::cli::SampleOptions sa;
    double sa_total = -1.0;
    std::string sampler = "euler", compare;
    auto* c_sa = app.add_subcommand("sample", "Generate a flood map from a checkpoint");
    c_sa->add_option("--checkpoint", sa.checkpoint, "Checkpoint file")->required();
    c_sa->add_option("--dem", sa.dem, "DEM ASCII grid")->required();
    c_sa->add_option("--rainfall", sa.rain.csv, "Rainfall CSV (hour,mm)");
    c_sa->add_option("--total-mm", sa_total, "Uniform 24 h rainfall total instead of a CSV");
    c_sa->add_option("--hour", sa.hour, "Forecast hour (1..24)")->capture_default_str();
    c_sa->add_option("--sampler", sampler, "euler, heun or rk4")->capture_default_str();
    c_sa->add_option("--steps", sa.steps, "Integration steps")->capture_default_str();
    c_sa->add_option("--compare-sampler", compare, "Also sample with this method and report the L1 difference");
    c_sa->add_option("--out", sa.out, "Output flood grid")->required();
    c_sa->add_option("--render", sa.render, "Optional PGM render");

    // eval
    piff::cli::EvalOptions ev;
    auto* c_ev = app.add_subcommand("eval", "Score predicted flood grids against references");
    c_ev->add_option("--truth", ev.truth_dir, "Directory of reference .asc grids")->required();
    c_ev->add_option("--pred", ev.pred_dir, "Directory of predicted .asc grids (same names)")->required();
    c_ev->add_option("--report", ev.report, "key=value report path")->required();
    c_ev->add_option("--csv", ev.csv, "Optional per-pair CSV");
    c_ev->add_option("--threshold-cm", ev.threshold_cm, "Flood threshold in cm")->capture_default_str();
    c_ev->add_option("--workers", ev.workers, "Parallel workers")->capture_default_str();
    c_ev->add_option("--truth-label", ev.truth_label, "Reference generator recorded in the report header")
        ->capture_default_str();

    // dem
    piff::cli::DemOptions dm;
    auto* c_dm = app.add_subcommand("dem", "Write a synthetic DEM");
    c_dm->add_option("--kind", dm.kind, "flat, slope, bowl or channel")->capture_default_str();
    c_dm->add_option("--rows", dm.rows)->capture_default_str();
    c_dm->add_option("--cols", dm.cols)->capture_default_str();
    c_dm->add_option("--base", dm.params.base)->capture_default_str();
    c_dm->add_option("--gradient", dm.params.gradient)->capture_default_str();
    c_dm->add_option("--relief", dm.params.relief)->capture_default_str();
    c_dm->add_option("--channel-width", dm.params.channel_width)->capture_default_str();
    c_dm->add_option("--noise", dm.params.noise)->capture_default_str();
    c_dm->add_option("--cell-size", dm.params.cell_size)->capture_default_str();
    c_dm->add_option("--out", dm.out, "Output DEM grid")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_spm->parsed()) {
            if (c_spm->count("--total-mm")) spm.rain.total_mm = spm_total;
            return piff::cli::cmd_spm(spm, global, std::cout);
        }
        if (c_sc->parsed()) return piff::cli::cmd_scenarios(sc, global, std::cout);
        if (c_tr->parsed()) {
            if (truth == "fill") tr.truth = piff::cli::TruthGenerator::fill;
            else if (truth != "spm") throw piff::Error("--truth must be spm or fill");
            return piff::cli::cmd_train(tr, global, std::cout);
        }
        if (c_sa->parsed()) {
            if (c_sa->count("--total-mm")) sa.rain.total_mm = sa_total;
            sa.sampler = method_of(sampler);
            if (!compare.empty()) sa.compare = method_of(compare);
            return piff::cli::cmd_sample(sa, global, std::cout);
        }
        if (c_ev->parsed()) return piff::cli::cmd_eval(ev, global, std::cout);
        if (c_dm->parsed()) return piff::cli::cmd_dem(dm, global, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "piff: error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
