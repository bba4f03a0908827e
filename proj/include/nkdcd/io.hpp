#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nkdcd/baseline.hpp"
#include "nkdcd/inference.hpp"
#include "nkdcd/optim.hpp"

namespace nkdcd::io {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// enum names

inline const char* to_string(PenaltyKind k) {
    switch (k) {
    case PenaltyKind::kUlg: return "ulg";
    case PenaltyKind::kHlg: return "hlg";
    case PenaltyKind::kIlg: return "ilg";
    }
    return "ilg";
}

inline const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

inline const char* to_string(Activation a) {
    return a == Activation::kLinear ? "linear" : "leaky_relu";
}

inline const char* to_string(ProxReference r) {
    return r == ProxReference::kPreGradient ? "pre_gradient" : "intermediate";
}

inline PenaltyKind parse_penalty(const std::string& s) {
    if (s == "ulg") return PenaltyKind::kUlg;
    if (s == "hlg") return PenaltyKind::kHlg;
    if (s == "ilg") return PenaltyKind::kIlg;
    throw ValidationError("unknown penalty kind '" + s + "', expected ulg|hlg|ilg");
}

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::kSgd;
    if (s == "adam") return OptimizerKind::kAdam;
    throw ValidationError("unknown optimizer '" + s + "', expected sgd|adam");
}

inline Activation parse_activation(const std::string& s) {
    if (s == "leaky_relu") return Activation::kLeakyRelu;
    if (s == "linear") return Activation::kLinear;
    throw ValidationError("unknown activation '" + s + "', expected leaky_relu|linear");
}

inline ProxReference parse_prox_reference(const std::string& s) {
    if (s == "intermediate") return ProxReference::kIntermediate;
    if (s == "pre_gradient") return ProxReference::kPreGradient;
    throw ValidationError("unknown prox_reference '" + s + "', expected intermediate|pre_gradient");
}

// ---------------------------------------------------------------------------
// CSV datasets: one row per time step, one column per series, '.' decimal,
// optional single header row.

inline void write_csv(const std::string& path, const Matrix& m, bool integer = false) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    char buf[40];
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            if (integer) {
                out << static_cast<long long>(m(i, j));
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
                out << buf;
            }
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    Index cols = -1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) { numeric = false; break; }
                row.push_back(v);
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) { first = false; continue; } // header row
            throw IoError("non-numeric cell in '" + path + "': " + line);
        }
        first = false;
        if (cols < 0) cols = static_cast<Index>(row.size());
        else if (cols != static_cast<Index>(row.size()))
            throw IoError("ragged CSV '" + path + "': expected " + std::to_string(cols) +
                          " columns, got " + std::to_string(row.size()));
        for (double v : row)
            if (!std::isfinite(v)) throw IoError("non-finite value in '" + path + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("no data rows in '" + path + "'");
    Matrix m(static_cast<Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Index j = 0; j < cols; ++j) m(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    return m;
}

// ---------------------------------------------------------------------------
// TrainConfig <-> JSON

inline Json config_to_json(const TrainConfig& c) {
    Json j;
    j["lambda"] = c.lambda;
    j["tau"] = c.tau;
    j["max_lag"] = c.max_lag;
    j["lift_dim"] = c.lift_dim;
    j["width"] = c.width;
    j["batch"] = c.batch;
    j["penalty"] = to_string(c.penalty);
    j["optimizer"] = to_string(c.optimizer);
    j["activation"] = to_string(c.activation);
    j["epsilon"] = c.epsilon;
    j["max_epochs"] = c.max_epochs;
    j["stop_threshold"] = c.stop_threshold;
    j["patience"] = c.patience;
    j["min_rel_decrease"] = c.min_rel_decrease;
    j["seed"] = c.seed;
    j["use_bias"] = c.use_bias;
    j["standardize"] = c.standardize;
    j["prox_reference"] = to_string(c.prox_reference);
    j["divergence_limit"] = c.divergence_limit;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    return j;
}

/// Strict parse: unknown keys are rejected so typos cannot silently fall back
/// to defaults. When `standardize` is absent it defaults to off for linear
/// activation (already-linear data) and on otherwise.
inline TrainConfig config_from_json(const Json& j) {
    static const std::vector<std::string> known = {
        "lambda", "tau", "max_lag", "lift_dim", "width", "batch", "penalty", "optimizer",
        "activation", "epsilon", "max_epochs", "stop_threshold", "patience", "min_rel_decrease",
        "seed", "use_bias", "standardize", "prox_reference", "divergence_limit", "adam_beta1",
        "adam_beta2", "adam_epsilon"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw ValidationError("config: unknown key '" + key + "'");
    }
    TrainConfig c;
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("max_lag")) c.max_lag = j.at("max_lag").get<Index>();
    if (j.contains("lift_dim")) c.lift_dim = j.at("lift_dim").get<Index>();
    if (j.contains("width")) c.width = j.at("width").get<Index>();
    if (j.contains("batch")) c.batch = j.at("batch").get<Index>();
    if (j.contains("penalty")) c.penalty = parse_penalty(j.at("penalty").get<std::string>());
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    if (j.contains("activation"))
        c.activation = parse_activation(j.at("activation").get<std::string>());
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<Index>();
    if (j.contains("stop_threshold")) c.stop_threshold = j.at("stop_threshold").get<double>();
    if (j.contains("patience")) c.patience = j.at("patience").get<Index>();
    if (j.contains("min_rel_decrease")) c.min_rel_decrease = j.at("min_rel_decrease").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("use_bias")) c.use_bias = j.at("use_bias").get<bool>();
    if (j.contains("standardize")) c.standardize = j.at("standardize").get<bool>();
    else c.standardize = c.activation != Activation::kLinear;
    if (j.contains("prox_reference"))
        c.prox_reference = parse_prox_reference(j.at("prox_reference").get<std::string>());
    if (j.contains("divergence_limit")) c.divergence_limit = j.at("divergence_limit").get<double>();
    if (j.contains("adam_beta1")) c.adam_beta1 = j.at("adam_beta1").get<double>();
    if (j.contains("adam_beta2")) c.adam_beta2 = j.at("adam_beta2").get<double>();
    if (j.contains("adam_epsilon")) c.adam_epsilon = j.at("adam_epsilon").get<double>();
    return c;
}

inline TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// checkpoints

inline Json matrix_to_flat(const Matrix& m) {
    Json arr = Json::array();
    for (Index k = 0; k < m.size(); ++k) arr.push_back(m.data()[k]);
    return arr;
}

inline void flat_to_matrix(const Json& arr, Matrix& m) {
    if (static_cast<Index>(arr.size()) != m.size())
        throw IoError("checkpoint: array of " + std::to_string(arr.size()) +
                      " values does not fill a " + m.shape() + " matrix");
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = arr.at(static_cast<std::size_t>(k)).get<double>();
}

inline Json net_to_json(const Mlp3& net) {
    Json layers = Json::array();
    for (int i = 0; i < 3; ++i) {
        const AffineLayer& l = net.layer(i);
        Json jl;
        jl["rows"] = l.weights.rows();
        jl["cols"] = l.weights.cols();
        jl["weights"] = matrix_to_flat(l.weights);
        jl["bias"] = matrix_to_flat(l.bias);
        layers.push_back(std::move(jl));
    }
    return layers;
}

inline void net_from_json(const Json& layers, Mlp3& net) {
    if (layers.size() != 3) throw IoError("checkpoint: expected 3 layers");
    for (int i = 0; i < 3; ++i) {
        const Json& jl = layers.at(static_cast<std::size_t>(i));
        AffineLayer& l = net.layer(i);
        if (jl.at("rows").get<Index>() != l.weights.rows() ||
            jl.at("cols").get<Index>() != l.weights.cols())
            throw IoError("checkpoint: layer " + std::to_string(i) + " is " +
                          jl.at("rows").dump() + "x" + jl.at("cols").dump() + ", expected " +
                          l.weights.shape());
        flat_to_matrix(jl.at("weights"), l.weights);
        flat_to_matrix(jl.at("bias"), l.bias);
    }
}

/// Lag stack as nested blocks: lags[l][i][j] is the row-major N x N block.
inline Json lags_to_json(const LagStack& lags) {
    Json out = Json::array();
    for (Index l = 0; l < lags.lags(); ++l) {
        Json rows = Json::array();
        for (Index i = 0; i < lags.series(); ++i) {
            Json cols = Json::array();
            for (Index j = 0; j < lags.series(); ++j)
                cols.push_back(matrix_to_flat(lags.block(l, i, j)));
            rows.push_back(std::move(cols));
        }
        out.push_back(std::move(rows));
    }
    return out;
}

inline void lags_from_json(const Json& j, LagStack& lags) {
    if (static_cast<Index>(j.size()) != lags.lags())
        throw IoError("checkpoint: lag count mismatch");
    for (Index l = 0; l < lags.lags(); ++l) {
        const Json& rows = j.at(static_cast<std::size_t>(l));
        for (Index i = 0; i < lags.series(); ++i) {
            const Json& cols = rows.at(static_cast<std::size_t>(i));
            for (Index jx = 0; jx < lags.series(); ++jx) {
                Matrix block(lags.lift_dim(), lags.lift_dim());
                flat_to_matrix(cols.at(static_cast<std::size_t>(jx)), block);
                lags.set_block(l, i, jx, block);
            }
        }
    }
}

inline Json breakdown_to_json(const LossBreakdown& b, Index series, Index length) {
    Json j;
    j["recon_autoencoder"] = b.recon_autoencoder;
    j["lifted_var"] = b.lifted_var;
    j["nar_base"] = b.nar_base;
    j["nar_autoencoded"] = b.nar_autoencoded;
    j["penalty"] = b.penalty;
    j["total"] = b.total();
    j["average_per_series"] = b.average_per_series(series, length);
    return j;
}

struct Checkpoint {
    std::string kind; // "nkdcd" or "linear_var"
    TrainConfig config;
    Index series = 0;
    Index length = 0; // T of the training panel

    // nkdcd
    NkdcdModel model;
    TrainReport report;

    // linear_var
    LinearVarModel linear;
};

inline Json checkpoint_to_json(const Checkpoint& c) {
    Json j;
    j["format_version"] = 1;
    j["kind"] = c.kind;
    j["config"] = config_to_json(c.config);
    j["series"] = c.series;
    j["length"] = c.length;
    if (c.kind == "nkdcd") {
        j["lift_dim"] = c.model.lift_dim;
        j["max_lag"] = c.model.max_lag;
        j["encoder"] = net_to_json(c.model.encoder);
        j["decoder"] = net_to_json(c.model.decoder);
        j["lags"] = lags_to_json(c.model.lags);
        Json rep;
        rep["epochs"] = c.report.epochs;
        rep["reason"] = to_string(c.report.reason);
        rep["final"] = breakdown_to_json(c.report.final_loss, c.series, c.length);
        j["report"] = std::move(rep);
    } else {
        j["lift_dim"] = 1;
        j["max_lag"] = c.linear.lags.lags();
        j["lags"] = lags_to_json(c.linear.lags);
        j["standardization"] = {{"mean", c.linear.mean}, {"scale", c.linear.scale}};
        Json rep;
        rep["epochs"] = c.linear.epochs;
        rep["objective"] = c.linear.objective;
        j["report"] = std::move(rep);
    }
    return j;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << checkpoint_to_json(c).dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    Checkpoint c;
    if (j.at("format_version").get<int>() != 1)
        throw IoError("checkpoint '" + path + "': unsupported format version");
    c.kind = j.at("kind").get<std::string>();
    c.config = config_from_json(j.at("config"));
    c.series = j.at("series").get<Index>();
    c.length = j.at("length").get<Index>();
    if (c.kind == "nkdcd") {
        c.model.series = c.series;
        c.model.lift_dim = j.at("lift_dim").get<Index>();
        c.model.max_lag = j.at("max_lag").get<Index>();
        c.model.encoder = make_encoder(c.config.width, c.model.lift_dim, c.config.activation,
                                       c.config.use_bias);
        c.model.decoder = make_decoder(c.config.width, c.model.lift_dim, c.config.activation,
                                       c.config.use_bias);
        c.model.lags = LagStack(c.series, c.model.lift_dim, c.model.max_lag);
        net_from_json(j.at("encoder"), c.model.encoder);
        net_from_json(j.at("decoder"), c.model.decoder);
        lags_from_json(j.at("lags"), c.model.lags);
        const Json& rep = j.at("report");
        c.report.epochs = rep.at("epochs").get<Index>();
        const std::string reason = rep.at("reason").get<std::string>();
        c.report.reason = reason == "converged"  ? StopReason::kConverged
                          : reason == "diverged" ? StopReason::kDiverged
                                                 : StopReason::kMaxEpochs;
        const Json& fin = rep.at("final");
        c.report.final_loss.recon_autoencoder = fin.at("recon_autoencoder").get<double>();
        c.report.final_loss.lifted_var = fin.at("lifted_var").get<double>();
        c.report.final_loss.nar_base = fin.at("nar_base").get<double>();
        c.report.final_loss.nar_autoencoded = fin.at("nar_autoencoded").get<double>();
        c.report.final_loss.penalty = fin.at("penalty").get<double>();
        c.report.final_average = fin.at("average_per_series").get<double>();
    } else if (c.kind == "linear_var") {
        c.linear.config = c.config;
        c.linear.lags = LagStack(c.series, 1, j.at("max_lag").get<Index>());
        lags_from_json(j.at("lags"), c.linear.lags);
        c.linear.mean = j.at("standardization").at("mean").get<std::vector<double>>();
        c.linear.scale = j.at("standardization").at("scale").get<std::vector<double>>();
        c.linear.epochs = j.at("report").at("epochs").get<Index>();
        c.linear.objective = j.at("report").at("objective").get<double>();
    } else {
        throw IoError("checkpoint '" + path + "': unknown kind '" + c.kind + "'");
    }
    return c;
}

/// The lag stack of either checkpoint kind, for scoring.
inline const LagStack& checkpoint_lags(const Checkpoint& c) {
    return c.kind == "nkdcd" ? c.model.lags : c.linear.lags;
}

// ---------------------------------------------------------------------------
// results

inline Json results_to_json(const MetricsReport& m, const TrainConfig& config,
                            const Json& dataset_meta, double wall_clock_seconds) {
    Json j;
    j["format_version"] = 1;
    j["auroc"] = m.auroc;
    j["aupr"] = m.aupr;
    j["epsilon"] = m.epsilon;
    j["include_self"] = m.include_self;
    Json roc = Json::array();
    for (const auto& p : m.roc) roc.push_back(Json::array({p.fpr, p.tpr}));
    j["roc"] = std::move(roc);
    Json pr = Json::array();
    for (const auto& p : m.pr) pr.push_back(Json::array({p.recall, p.precision}));
    j["pr"] = std::move(pr);
    Json adj = Json::array();
    for (Index i = 0; i < m.adjacency.rows(); ++i) {
        Json row = Json::array();
        for (Index jx = 0; jx < m.adjacency.cols(); ++jx)
            row.push_back(static_cast<int>(m.adjacency(i, jx)));
        adj.push_back(std::move(row));
    }
    j["adjacency"] = std::move(adj);
    j["confusion"] = {{"tp", m.confusion.tp},
                      {"fp", m.confusion.fp},
                      {"tn", m.confusion.tn},
                      {"fn", m.confusion.fn}};
    j["config"] = config_to_json(config);
    j["dataset"] = dataset_meta;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j;
}

inline void save_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace nkdcd::io
