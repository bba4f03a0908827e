// Command-line front end: synthetic data generation, model training, causal
// structure readout, metric evaluation, and heat-map export.
//
// Exit codes: 0 success, 1 numeric failure (divergence, undefined metric),
// 2 I/O or validation failure.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nkdcd/baseline.hpp"
#include "nkdcd/datagen.hpp"
#include "nkdcd/heatmap.hpp"
#include "nkdcd/inference.hpp"
#include "nkdcd/io.hpp"
#include "nkdcd/optim.hpp"

namespace fs = std::filesystem;
using namespace nkdcd;

namespace {

int thread_cap() {
    if (const char* env = std::getenv("NKDCD_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Two-sided 95% Student-t quantile for small samples; 1.96 beyond the table.
double t95(int df) {
    static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                   2.306,  2.262, 2.228, 2.201, 2.179, 2.160, 2.145,
                                   2.131,  2.120, 2.110, 2.101, 2.093, 2.086};
    if (df < 1) return 0.0;
    if (df <= 20) return table[df - 1];
    return 1.96;
}

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;
};

MeanCi mean_ci(const std::vector<double>& xs) {
    MeanCi out;
    const auto k = static_cast<double>(xs.size());
    for (double x : xs) out.mean += x;
    out.mean /= k;
    if (xs.size() < 2) return out;
    double var = 0.0;
    for (double x : xs) var += (x - out.mean) * (x - out.mean);
    var /= (k - 1.0);
    out.half_width = t95(static_cast<int>(xs.size()) - 1) * std::sqrt(var / k);
    return out;
}

io::Json dataset_meta(const std::string& path, const Matrix& panel) {
    io::Json j;
    j["path"] = path;
    j["rows"] = panel.rows();
    j["cols"] = panel.cols();
    return j;
}

std::string seed_suffixed(const std::string& path, std::uint64_t seed) {
    fs::path p(path);
    fs::path stem = p.stem();
    stem += "-seed" + std::to_string(seed);
    stem += p.extension();
    return (p.parent_path() / stem).string();
}

void print_breakdown(Index epoch, const LossBreakdown& l, Index series, Index length) {
    std::cout << "epoch " << epoch << "  fit=" << l.fit_total()
              << "  avg=" << l.average_per_series(series, length)
              << "  penalty=" << l.penalty << '\n';
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    // var3
    Index var_n = 10;
    Index var_t = 1000;
    double coupling = 0.1;
    double self_coupling = 0.1;
    double noise_std = 0.1;
    // lorenz96
    Index lor_n = 20;
    Index lor_t = 1000;
    double forcing = 10.0;
    double dt = 0.1;
    Index substeps = 10;
    Index burn_in = 1000;
    double init_noise = 0.01;
    // shared
    std::uint64_t seed = 0;
    std::string out;
    std::string truth_out;
};

int run_generate(const std::string& kind, const GenerateArgs& a) {
    TimeSeriesData data;
    if (kind == "var3") {
        Var3Spec spec;
        spec.n = a.var_n;
        spec.T = a.var_t;
        spec.coupling = a.coupling;
        spec.self_coupling = a.self_coupling;
        spec.noise_std = a.noise_std;
        spec.seed = a.seed;
        data = generate_var(spec);
    } else {
        Lorenz96Spec spec;
        spec.n = a.lor_n;
        spec.T = a.lor_t;
        spec.forcing = a.forcing;
        spec.dt_sample = a.dt;
        spec.substeps = a.substeps;
        spec.burn_in = a.burn_in;
        spec.init_noise = a.init_noise;
        spec.seed = a.seed;
        data = generate_lorenz96(spec);
    }
    io::write_csv(a.out, data.values);
    if (!a.truth_out.empty()) io::write_csv(a.truth_out, *data.truth, /*integer=*/true);
    std::cout << data.meta.generator << ": T=" << data.length() << " n=" << data.series()
              << " seed=" << data.meta.seed << " (" << data.meta.params << ")\n"
              << "wrote " << a.out;
    if (!a.truth_out.empty()) std::cout << " and " << a.truth_out;
    std::cout << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data_path;
    std::string config_path;
    std::string out_checkpoint;
    std::string truth_path;   // optional: evaluate each seed after training
    std::string out_results;  // optional: aggregate results JSON
    int seeds = 1;
    Index log_every = 100;
    int standardize = -1; // -1 follow config, 0 off, 1 on
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    Index epochs = 0;
    StopReason reason = StopReason::kMaxEpochs;
    double final_average = 0.0;
    double auroc_value = 0.0;
    double aupr_value = 0.0;
};

int run_train(const TrainArgs& a) {
    TrainConfig base = io::load_config(a.config_path);
    if (a.standardize >= 0) base.standardize = a.standardize == 1;
    base.validate();

    TimeSeriesData data;
    data.values = io::read_csv(a.data_path);
    data.meta.generator = "csv";

    std::optional<Matrix> truth;
    if (!a.truth_path.empty()) truth = io::read_csv(a.truth_path);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<SeedOutcome> outcomes(static_cast<std::size_t>(a.seeds));
    std::vector<int> failures(static_cast<std::size_t>(a.seeds), 0);
    std::mutex io_mutex;

    const auto run_one = [&](int k) {
        TrainConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(k);
        EpochCallback progress;
        if (a.seeds == 1 && a.log_every > 0) {
            progress = [&](Index epoch, const LossBreakdown& l) {
                if (epoch % a.log_every == 0)
                    print_breakdown(epoch, l, data.series(), data.length());
            };
        }
        auto [model, report] = train(data, cfg, progress);

        SeedOutcome& o = outcomes[static_cast<std::size_t>(k)];
        o.seed = cfg.seed;
        o.epochs = report.epochs;
        o.reason = report.reason;
        o.final_average = report.final_average;
        if (report.reason == StopReason::kDiverged) {
            failures[static_cast<std::size_t>(k)] = 1;
            std::lock_guard<std::mutex> lock(io_mutex);
            std::cerr << "seed " << cfg.seed << ": diverged at epoch " << report.epochs << '\n';
            return;
        }

        io::Checkpoint ck;
        ck.kind = "nkdcd";
        ck.config = cfg;
        ck.series = data.series();
        ck.length = data.length();
        ck.model = std::move(model);
        ck.report = std::move(report);
        const std::string path =
            a.seeds == 1 ? a.out_checkpoint : seed_suffixed(a.out_checkpoint, cfg.seed);
        io::save_checkpoint(path, ck);

        if (truth) {
            GcScores scores = score_gc(ck.model.lags);
            o.auroc_value = auroc(scores, *truth);
            o.aupr_value = aupr(scores, *truth);
        }
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "seed " << cfg.seed << ": " << to_string(o.reason) << " after " << o.epochs
                  << " epochs, final avg fit " << o.final_average;
        if (truth) std::cout << ", auroc " << o.auroc_value << ", aupr " << o.aupr_value;
        std::cout << "\nwrote " << path << '\n';
    };

    if (a.seeds == 1) {
        run_one(0);
    } else {
        const int workers = std::min(a.seeds, thread_cap());
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int k = next.fetch_add(1); k < a.seeds; k = next.fetch_add(1)) run_one(k);
            });
        }
        for (auto& th : pool) th.join();
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (int f : failures)
        if (f) return 1;

    if (a.seeds > 1) {
        std::vector<double> epochs, aurocs, auprs;
        for (const auto& o : outcomes) {
            epochs.push_back(static_cast<double>(o.epochs));
            aurocs.push_back(o.auroc_value);
            auprs.push_back(o.aupr_value);
        }
        const MeanCi ep = mean_ci(epochs);
        std::cout << "aggregate over " << a.seeds << " seeds: epochs " << ep.mean << " +- "
                  << ep.half_width;
        if (truth) {
            const MeanCi au = mean_ci(aurocs), ap = mean_ci(auprs);
            std::cout << ", auroc " << au.mean << " +- " << au.half_width << ", aupr " << ap.mean
                      << " +- " << ap.half_width;
        }
        std::cout << '\n';
        if (!a.out_results.empty()) {
            io::Json j;
            j["format_version"] = 1;
            j["seeds"] = a.seeds;
            j["config"] = io::config_to_json(base);
            j["dataset"] = dataset_meta(a.data_path, data.values);
            io::Json per_seed = io::Json::array();
            for (const auto& o : outcomes) {
                io::Json s;
                s["seed"] = o.seed;
                s["epochs"] = o.epochs;
                s["reason"] = to_string(o.reason);
                s["final_average"] = o.final_average;
                if (truth) {
                    s["auroc"] = o.auroc_value;
                    s["aupr"] = o.aupr_value;
                }
                per_seed.push_back(std::move(s));
            }
            j["runs"] = std::move(per_seed);
            j["epochs_mean"] = ep.mean;
            j["epochs_ci95"] = ep.half_width;
            if (truth) {
                const MeanCi au = mean_ci(aurocs), ap = mean_ci(auprs);
                j["auroc_mean"] = au.mean;
                j["auroc_ci95"] = au.half_width;
                j["aupr_mean"] = ap.mean;
                j["aupr_ci95"] = ap.half_width;
            }
            j["wall_clock_seconds"] = wall;
            io::save_json(a.out_results, j);
            std::cout << "wrote " << a.out_results << '\n';
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------

int run_baseline(const std::string& data_path, const std::string& config_path,
                 const std::string& out) {
    TrainConfig cfg = io::load_config(config_path);
    TimeSeriesData data;
    data.values = io::read_csv(data_path);
    LinearVarModel model = fit_var(data, cfg);
    io::Checkpoint ck;
    ck.kind = "linear_var";
    ck.config = cfg;
    ck.series = data.series();
    ck.length = data.length();
    ck.linear = std::move(model);
    io::save_checkpoint(out, ck);
    std::cout << "linear VAR fit: " << ck.linear.epochs << " iterations, objective "
              << ck.linear.objective << "\nwrote " << out << '\n';
    return 0;
}

int run_infer(const std::string& checkpoint, double epsilon, bool epsilon_given,
              const std::string& out, const std::string& scores_out) {
    io::Checkpoint ck = io::load_checkpoint(checkpoint);
    const double eps = epsilon_given ? epsilon : ck.config.epsilon;
    GcScores scores = score_gc(io::checkpoint_lags(ck));
    Matrix adjacency = threshold_adjacency(scores, eps);
    io::write_csv(out, adjacency, /*integer=*/true);
    if (!scores_out.empty()) io::write_csv(scores_out, scores.scores);
    Index edges = 0;
    for (Index i = 0; i < adjacency.rows(); ++i)
        for (Index j = 0; j < adjacency.cols(); ++j) edges += adjacency(i, j) != 0.0 ? 1 : 0;
    std::cout << "epsilon " << eps << ": " << edges << " of " << adjacency.size()
              << " edges kept\nwrote " << out << '\n';
    return 0;
}

int run_eval(const std::string& checkpoint, const std::string& scores_path,
             const std::string& truth_path, double epsilon, bool epsilon_given, bool include_self,
             const std::string& out) {
    const auto t0 = std::chrono::steady_clock::now();
    GcScores scores;
    TrainConfig cfg;
    double eps = epsilon_given ? epsilon : 0.0;
    if (!checkpoint.empty()) {
        io::Checkpoint ck = io::load_checkpoint(checkpoint);
        scores = score_gc(io::checkpoint_lags(ck));
        cfg = ck.config;
        if (!epsilon_given) eps = cfg.epsilon;
    } else {
        scores.scores = io::read_csv(scores_path);
    }
    Matrix truth = io::read_csv(truth_path);
    MetricsReport report = evaluate(scores, truth, eps, include_self);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    io::save_json(out, io::results_to_json(report, cfg, dataset_meta(truth_path, truth), wall));
    std::cout << "auroc " << report.auroc << "  aupr " << report.aupr << "  (epsilon " << eps
              << ", " << (include_self ? "diagonal included" : "diagonal excluded")
              << ")\nwrote " << out << '\n';
    return 0;
}

int run_heatmap(const std::string& checkpoint, const std::string& out_dir) {
    io::Checkpoint ck = io::load_checkpoint(checkpoint);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory '" + out_dir + "': " + ec.message());
    GcScores scores = score_gc(io::checkpoint_lags(ck));
    write_heatmaps(out_dir, scores);
    std::cout << "wrote " << scores.per_lag.size() << " heat maps under " << out_dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Granger-causal structure discovery via learned lifting with "
                 "group-lasso-sparsified lag matrices"};
    app.require_subcommand(1);

    // generate
    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
    generate->require_subcommand(1);
    CLI::App* var3 = generate->add_subcommand("var3", "Sparse order-3 linear autoregression");
    var3->add_option("--n", gen.var_n, "number of series");
    var3->add_option("--t", gen.var_t, "number of time steps")->required();
    var3->add_option("--coupling", gen.coupling, "cross-series lag weight");
    var3->add_option("--self-coupling", gen.self_coupling, "own-lag weight");
    var3->add_option("--noise-std", gen.noise_std, "innovation standard deviation");
    CLI::App* lorenz = generate->add_subcommand("lorenz96", "Chaotic cyclic advection system");
    lorenz->add_option("--n", gen.lor_n, "number of series (>= 4)");
    lorenz->add_option("--t", gen.lor_t, "number of samples")->required();
    lorenz->add_option("--f", gen.forcing, "forcing constant");
    lorenz->add_option("--dt", gen.dt, "sampling interval");
    lorenz->add_option("--substeps", gen.substeps, "RK4 steps per sample");
    lorenz->add_option("--burn-in", gen.burn_in, "samples discarded before recording");
    lorenz->add_option("--init-noise", gen.init_noise, "initial state perturbation scale");
    for (CLI::App* sub : {var3, lorenz}) {
        sub->add_option("--seed", gen.seed, "generator seed");
        sub->add_option("--out", gen.out, "dataset CSV path")->required();
        sub->add_option("--truth-out", gen.truth_out, "ground-truth adjacency CSV path");
    }

    // train
    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Fit the lifted lag model");
    train_cmd->add_option("--data", tr.data_path, "dataset CSV")->required();
    train_cmd->add_option("--config", tr.config_path, "training config JSON")->required();
    train_cmd->add_option("--out-checkpoint", tr.out_checkpoint, "checkpoint JSON path")->required();
    train_cmd->add_option("--truth", tr.truth_path, "truth CSV for per-seed evaluation");
    train_cmd->add_option("--seeds", tr.seeds, "independent runs with consecutive seeds")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--out-results", tr.out_results, "aggregate results JSON (with --seeds)");
    train_cmd->add_option("--log-every", tr.log_every, "progress print period in epochs");
    auto* std_on = train_cmd->add_flag("--standardize", "z-score each column before training");
    auto* std_off = train_cmd->add_flag("--no-standardize", "use the panel as-is");

    // baseline
    std::string b_data, b_config, b_out;
    CLI::App* baseline_cmd = app.add_subcommand("baseline", "Fit the linear VAR comparison model");
    baseline_cmd->add_option("--data", b_data, "dataset CSV")->required();
    baseline_cmd->add_option("--config", b_config, "training config JSON")->required();
    baseline_cmd->add_option("--out", b_out, "checkpoint JSON path")->required();

    // infer
    std::string i_checkpoint, i_out, i_scores_out;
    double i_epsilon = 0.0;
    CLI::App* infer_cmd = app.add_subcommand("infer", "Threshold scores into an adjacency matrix");
    infer_cmd->add_option("--checkpoint", i_checkpoint, "checkpoint JSON")->required();
    auto* i_eps_opt = infer_cmd->add_option("--epsilon", i_epsilon, "score threshold");
    infer_cmd->add_option("--out", i_out, "adjacency CSV path")->required();
    infer_cmd->add_option("--scores-out", i_scores_out, "also write the score matrix as CSV");

    // eval
    std::string e_checkpoint, e_scores, e_truth, e_out;
    double e_epsilon = 0.0;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Score a model against ground truth");
    eval_cmd->add_option("--checkpoint", e_checkpoint, "checkpoint JSON");
    eval_cmd->add_option("--scores", e_scores, "score matrix CSV (alternative to --checkpoint)");
    eval_cmd->add_option("--truth", e_truth, "ground-truth adjacency CSV")->required();
    auto* e_eps_opt = eval_cmd->add_option("--epsilon", e_epsilon, "adjacency threshold");
    auto* e_self_on = eval_cmd->add_flag("--include-self", "count diagonal pairs (default)");
    auto* e_self_off = eval_cmd->add_flag("--exclude-self", "ignore diagonal pairs");
    eval_cmd->add_option("--out", e_out, "results JSON path")->required();

    // heatmap
    std::string h_checkpoint, h_out;
    CLI::App* heatmap_cmd = app.add_subcommand("heatmap", "Per-lag block-norm heat maps as SVG");
    heatmap_cmd->add_option("--checkpoint", h_checkpoint, "checkpoint JSON")->required();
    heatmap_cmd->add_option("--out", h_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*var3) return run_generate("var3", gen);
        if (*lorenz) return run_generate("lorenz96", gen);
        if (*train_cmd) {
            if (*std_on) tr.standardize = 1;
            if (*std_off) tr.standardize = 0;
            return run_train(tr);
        }
        if (*baseline_cmd) return run_baseline(b_data, b_config, b_out);
        if (*infer_cmd)
            return run_infer(i_checkpoint, i_epsilon, i_eps_opt->count() > 0, i_out, i_scores_out);
        if (*eval_cmd) {
            if (e_checkpoint.empty() == e_scores.empty())
                throw ValidationError("eval: give exactly one of --checkpoint or --scores");
            const bool include_self = e_self_off->count() == 0 || e_self_on->count() > 0;
            return run_eval(e_checkpoint, e_scores, e_truth, e_epsilon, e_eps_opt->count() > 0,
                            include_self, e_out);
        }
        if (*heatmap_cmd) return run_heatmap(h_checkpoint, h_out);
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
