#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "nkdcd/datagen.hpp"
#include "nkdcd/loss.hpp"

namespace nkdcd {

enum class OptimizerKind { kSgd, kAdam };

/// Which norms feed the denominator of the shrinkage factor: the post-gradient
/// intermediate (standard proximal form) or the pre-gradient iterate.
enum class ProxReference { kIntermediate, kPreGradient };

enum class StopReason { kConverged, kMaxEpochs, kDiverged };

struct TrainConfig {
    double lambda = 0.05; // penalty weight
    double tau = 5e-4;    // learning rate, also the prox step scale
    Index max_lag = 5;    // L
    Index lift_dim = 15;  // N
    Index width = 16;     // h, hidden width parameter (even)
    Index batch = 500;    // prediction windows per optimizer step
    PenaltyKind penalty = PenaltyKind::kIlg;
    OptimizerKind optimizer = OptimizerKind::kSgd;
    Activation activation = Activation::kLeakyRelu;
    double epsilon = 0.0; // score threshold used when reading off adjacency
    Index max_epochs = 2000;
    double stop_threshold = 0.9; // on the average fit loss per scalar observation
    Index patience = 50;         // epochs without meaningful decrease
    double min_rel_decrease = 1e-4;
    std::uint64_t seed = 0;
    bool use_bias = true;
    bool standardize = true; // z-score the panel before fitting
    ProxReference prox_reference = ProxReference::kIntermediate;
    double divergence_limit = 1e12;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const {
        if (!(lambda > 0.0)) throw ValidationError("config: lambda must be > 0");
        if (!(tau > 0.0 && tau <= 1.0))
            throw ValidationError("config: tau must satisfy 0 < tau <= 1, got " + std::to_string(tau));
        if (max_lag < 1) throw ValidationError("config: max_lag must be >= 1");
        if (lift_dim < 1) throw ValidationError("config: lift_dim must be >= 1");
        if (batch < 1) throw ValidationError("config: batch must be >= 1");
        if (width < 2 || width % 2 != 0)
            throw ValidationError("config: width must be even and >= 2, got " + std::to_string(width));
        if (max_epochs < 1) throw ValidationError("config: max_epochs must be >= 1");
        if (patience < 1) throw ValidationError("config: patience must be >= 1");
        if (!(stop_threshold > 0.0)) throw ValidationError("config: stop_threshold must be > 0");
        if (epsilon < 0.0) throw ValidationError("config: epsilon must be >= 0");
    }
};

struct TrainReport {
    Index epochs = 0;
    std::vector<LossBreakdown> history; // one entry per epoch
    StopReason reason = StopReason::kMaxEpochs;
    LossBreakdown final_loss;  // exact full-data loss at the returned parameters
    double final_average = 0.0;
};

inline const char* to_string(StopReason r) {
    switch (r) {
    case StopReason::kConverged: return "converged";
    case StopReason::kMaxEpochs: return "max-epochs";
    case StopReason::kDiverged: return "diverged";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// parameter updates

inline void sgd_step(Matrix& param, const Matrix& grad, double tau) {
    if (!grad.all_finite()) throw DivergenceError("sgd_step: non-finite gradient");
    Matrix::check_same_shape(param, grad, "sgd_step");
    param.eigen() -= tau * grad.eigen();
}

struct AdamState {
    Matrix first;  // gradient running mean
    Matrix second; // squared-gradient running mean
};

inline void adam_step(Matrix& param, AdamState& state, const Matrix& grad, double tau,
                      long long step, double beta1, double beta2, double eps) {
    if (!grad.all_finite()) throw DivergenceError("adam_step: non-finite gradient");
    Matrix::check_same_shape(param, grad, "adam_step");
    if (state.first.size() == 0) {
        state.first = Matrix(param.rows(), param.cols());
        state.second = Matrix(param.rows(), param.cols());
    }
    state.first.eigen() = beta1 * state.first.eigen() + (1.0 - beta1) * grad.eigen();
    state.second.eigen() =
        beta2 * state.second.eigen() + (1.0 - beta2) * grad.eigen().cwiseProduct(grad.eigen());
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    param.eigen().array() -=
        tau * (state.first.eigen().array() / c1) / ((state.second.eigen().array() / c2).sqrt() + eps);
}

struct ModelGrads {
    std::array<Matrix, 6> encoder;
    std::array<Matrix, 6> decoder;
    std::vector<Matrix> lags;
};

inline ModelGrads extract_grads(const ad::Tape& tape, const TapedParams& p) {
    ModelGrads g;
    for (std::size_t k = 0; k < 6; ++k) {
        g.encoder[k] = tape.gradient(p.encoder[k]);
        g.decoder[k] = tape.gradient(p.decoder[k]);
    }
    g.lags.reserve(p.lags.size());
    for (ad::NodeId id : p.lags) g.lags.push_back(tape.gradient(id));
    return g;
}

/// Plain gradient step on the lifting and projection nets only; the lag
/// matrices are untouched here (they take the gradient-then-prox path).
inline void sgd_step_encoder_decoder(NkdcdModel& model, const ModelGrads& g, double tau) {
    for (int i = 0; i < 3; ++i) {
        const auto wi = static_cast<std::size_t>(2 * i);
        sgd_step(model.encoder.layer(i).weights, g.encoder[wi], tau);
        sgd_step(model.decoder.layer(i).weights, g.decoder[wi], tau);
        if (model.encoder.bias_enabled()) {
            sgd_step(model.encoder.layer(i).bias, g.encoder[wi + 1], tau);
            sgd_step(model.decoder.layer(i).bias, g.decoder[wi + 1], tau);
        }
    }
}

// ---------------------------------------------------------------------------
// proximal operators
//
// Every operator scales whole blocks by (1 - tau_lambda / norm)_+ where the
// norm is the entrywise L2 norm of the group the penalty defines. Groups
// whose norm is zero map to zero.

namespace detail {

inline double shrink_factor(double group_norm, double tau_lambda) {
    if (group_norm <= 0.0) return 0.0;
    return std::max(0.0, 1.0 - tau_lambda / group_norm);
}

inline void check_same_dims(const LagStack& a, const LagStack& b, const char* op) {
    if (a.series() != b.series() || a.lift_dim() != b.lift_dim() || a.lags() != b.lags())
        throw ShapeError(std::string(op) + ": stacks have different dimensions");
}

} // namespace detail

/// All L blocks of a pair (i,j) scale together by the joint group norm taken
/// from `norm_source` (pass the stack itself for the standard proximal form).
inline LagStack prox_ulg(const LagStack& stack, double tau_lambda, const LagStack& norm_source) {
    detail::check_same_dims(stack, norm_source, "prox_ulg");
    LagStack out = stack;
    const Index n = stack.series(), L = stack.lags();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            double sq = 0.0;
            for (Index l = 0; l < L; ++l) sq += norm_source.block_squared_norm(l, i, j);
            const double f = detail::shrink_factor(std::sqrt(sq), tau_lambda);
            for (Index l = 0; l < L; ++l) out.scale_block(l, i, j, f);
        }
    }
    return out;
}

inline LagStack prox_ulg(const LagStack& stack, double tau_lambda) {
    return prox_ulg(stack, tau_lambda, stack);
}

/// L sequential rounds; round l rescales the suffix blocks {l..L} of every
/// pair by the suffix group norm at the previous round's values. The first
/// lag sees one round of shrinkage, the last lag sees L rounds.
inline LagStack prox_hlg(const LagStack& stack, double tau_lambda) {
    LagStack out = stack;
    const Index n = stack.series(), L = stack.lags();
    for (Index round = 0; round < L; ++round) {
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                double sq = 0.0;
                for (Index l = round; l < L; ++l) sq += out.block_squared_norm(l, i, j);
                const double f = detail::shrink_factor(std::sqrt(sq), tau_lambda);
                for (Index l = round; l < L; ++l) out.scale_block(l, i, j, f);
            }
        }
    }
    return out;
}

/// Each lag block shrinks independently by its own norm from `norm_source`.
inline LagStack prox_ilg(const LagStack& stack, double tau_lambda, const LagStack& norm_source) {
    detail::check_same_dims(stack, norm_source, "prox_ilg");
    LagStack out = stack;
    const Index n = stack.series(), L = stack.lags();
    for (Index l = 0; l < L; ++l)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                out.scale_block(l, i, j,
                                detail::shrink_factor(
                                    std::sqrt(norm_source.block_squared_norm(l, i, j)), tau_lambda));
    return out;
}

inline LagStack prox_ilg(const LagStack& stack, double tau_lambda) {
    return prox_ilg(stack, tau_lambda, stack);
}

/// Dispatch on penalty kind. `pre_gradient` supplies the reference norms when
/// the config asks for the literal pre-gradient denominators; the hlg rounds
/// are defined on intermediate values either way.
inline LagStack apply_prox(const LagStack& intermediate, PenaltyKind kind, double tau_lambda,
                           ProxReference reference, const LagStack* pre_gradient = nullptr) {
    const bool use_pre = reference == ProxReference::kPreGradient && pre_gradient != nullptr;
    switch (kind) {
    case PenaltyKind::kUlg:
        return use_pre ? prox_ulg(intermediate, tau_lambda, *pre_gradient)
                       : prox_ulg(intermediate, tau_lambda);
    case PenaltyKind::kHlg:
        return prox_hlg(intermediate, tau_lambda);
    case PenaltyKind::kIlg:
        return use_pre ? prox_ilg(intermediate, tau_lambda, *pre_gradient)
                       : prox_ilg(intermediate, tau_lambda);
    }
    throw ValidationError("apply_prox: unknown penalty kind");
}

// ---------------------------------------------------------------------------
// training loop

namespace detail {

inline Matrix gather_rows(const Matrix& panel, const std::vector<Index>& targets, Index offset) {
    Matrix out(static_cast<Index>(targets.size()), panel.cols());
    for (std::size_t k = 0; k < targets.size(); ++k)
        out.set_block(static_cast<Index>(k), 0, panel.row_range(targets[k] - offset, 1));
    return out;
}

struct AdamBuffers {
    std::array<AdamState, 6> encoder;
    std::array<AdamState, 6> decoder;
    std::vector<AdamState> lags;
    long long step = 0;
};

inline void update_net(Mlp3& net, const std::array<Matrix, 6>& grads, const TrainConfig& cfg,
                       std::array<AdamState, 6>& adam, long long step) {
    for (int i = 0; i < 3; ++i) {
        const auto wi = static_cast<std::size_t>(2 * i);
        auto& layer = net.layer(i);
        if (cfg.optimizer == OptimizerKind::kAdam) {
            adam_step(layer.weights, adam[wi], grads[wi], cfg.tau, step, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_epsilon);
            if (net.bias_enabled())
                adam_step(layer.bias, adam[wi + 1], grads[wi + 1], cfg.tau, step, cfg.adam_beta1,
                          cfg.adam_beta2, cfg.adam_epsilon);
        } else {
            sgd_step(layer.weights, grads[wi], cfg.tau);
            if (net.bias_enabled()) sgd_step(layer.bias, grads[wi + 1], cfg.tau);
        }
    }
}

} // namespace detail

/// One optimizer step on a batch of windows: gradient updates for the nets,
/// gradient-then-prox for the lag stack. Returns the batch loss terms (raw
/// sums, as reported everywhere).
///
/// The descent direction is the per-sample gradient of the fit loss under the
/// conventional 1/2-quadratic scaling: raw-sum gradients grow with the batch,
/// so the documented learning rates would diverge immediately. Each parameter
/// group is normalized by the number of samples it actually processes per
/// step: the shared scalar nets see batch*series scalar samples, the lag
/// matrices see batch lifted vectors. The loss values themselves stay
/// unnormalized.
inline LossBreakdown train_step(NkdcdModel& model, const Matrix& current,
                                const std::vector<Matrix>& lagged, const TrainConfig& cfg,
                                detail::AdamBuffers& adam) {
    ad::Tape tape;
    TapedParams params = register_parameters(tape, model);
    BatchLoss loss = build_fit_loss(tape, model, params, current, lagged);
    tape.backward(loss.fit_total);
    ModelGrads grads = extract_grads(tape, params);
    const double net_scale = 0.5 / static_cast<double>(current.rows() * current.cols());
    const double lag_scale = 0.5 / static_cast<double>(current.rows());
    for (auto& g : grads.encoder) g *= net_scale;
    for (auto& g : grads.decoder) g *= net_scale;
    for (auto& g : grads.lags) g *= lag_scale;

    LossBreakdown batch;
    batch.recon_autoencoder = tape.value(loss.recon_autoencoder)(0, 0);
    batch.lifted_var = tape.value(loss.lifted_var)(0, 0);
    batch.nar_base = tape.value(loss.nar_base)(0, 0);
    batch.nar_autoencoded = tape.value(loss.nar_autoencoded)(0, 0);

    ++adam.step;
    detail::update_net(model.encoder, grads.encoder, cfg, adam.encoder, adam.step);
    detail::update_net(model.decoder, grads.decoder, cfg, adam.decoder, adam.step);

    // lag matrices: gradient step to the intermediate stack, then shrinkage
    LagStack pre_gradient;
    if (cfg.prox_reference == ProxReference::kPreGradient) pre_gradient = model.lags;
    for (Index l = 0; l < model.max_lag; ++l) {
        Matrix& w = model.lags.matrix(l);
        const Matrix& g = grads.lags[static_cast<std::size_t>(l)];
        if (cfg.optimizer == OptimizerKind::kAdam)
            adam_step(w, adam.lags[static_cast<std::size_t>(l)], g, cfg.tau, adam.step,
                      cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
        else
            sgd_step(w, g, cfg.tau);
    }
    const double penalty_before = penalty(model.lags, cfg.penalty);
    model.lags = apply_prox(model.lags, cfg.penalty, cfg.tau * cfg.lambda, cfg.prox_reference,
                            cfg.prox_reference == ProxReference::kPreGradient ? &pre_gradient
                                                                              : nullptr);
    const double penalty_after = penalty(model.lags, cfg.penalty);
    if (penalty_after > penalty_before * (1.0 + 1e-9) + 1e-12)
        throw NumericError("train_step: shrinkage increased the penalty (" +
                           std::to_string(penalty_before) + " -> " + std::to_string(penalty_after) + ")");
    return batch;
}

/// Full training run. Each epoch shuffles the valid prediction targets
/// t in (L, T], slices them into batches, and takes one step per batch; the
/// recorded per-epoch loss is the sum of the batch terms (so it covers every
/// valid window exactly once) plus the end-of-epoch penalty. Stops when the
/// average fit loss per scalar observation is below the threshold and has not
/// meaningfully decreased for `patience` epochs, or at max_epochs. On
/// divergence the report says so and carries the history up to that epoch.
using EpochCallback = std::function<void(Index epoch, const LossBreakdown&)>;

inline std::pair<NkdcdModel, TrainReport> train(const TimeSeriesData& data, const TrainConfig& cfg,
                                                const EpochCallback& on_epoch = {}) {
    cfg.validate();
    const Index T = data.length();
    const Index n = data.series();
    if (T <= cfg.max_lag)
        throw ValidationError("train: insufficient data, T=" + std::to_string(T) +
                              " must exceed max_lag=" + std::to_string(cfg.max_lag));
    if (!data.values.all_finite()) throw ValidationError("train: panel contains non-finite values");

    const Matrix panel = cfg.standardize ? standardize_columns(data.values) : data.values;

    NkdcdModel model = NkdcdModel::init(n, cfg.lift_dim, cfg.max_lag, cfg.width, cfg.activation,
                                        cfg.use_bias, cfg.seed);
    std::mt19937_64 batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<Index> targets(static_cast<std::size_t>(T - cfg.max_lag));
    std::iota(targets.begin(), targets.end(), cfg.max_lag);

    detail::AdamBuffers adam;
    adam.lags.resize(static_cast<std::size_t>(cfg.max_lag));

    TrainReport report;
    std::vector<double> averages;
    bool stopped = false;

    for (Index epoch = 0; epoch < cfg.max_epochs && !stopped; ++epoch) {
        std::shuffle(targets.begin(), targets.end(), batch_rng);
        LossBreakdown epoch_loss;
        try {
            for (std::size_t begin = 0; begin < targets.size(); begin += static_cast<std::size_t>(cfg.batch)) {
                const auto end = std::min(begin + static_cast<std::size_t>(cfg.batch), targets.size());
                const std::vector<Index> chunk(targets.begin() + static_cast<std::ptrdiff_t>(begin),
                                               targets.begin() + static_cast<std::ptrdiff_t>(end));
                Matrix current = detail::gather_rows(panel, chunk, 0);
                std::vector<Matrix> lagged;
                lagged.reserve(static_cast<std::size_t>(cfg.max_lag));
                for (Index l = 1; l <= cfg.max_lag; ++l)
                    lagged.push_back(detail::gather_rows(panel, chunk, l));
                epoch_loss += train_step(model, current, lagged, cfg, adam);
            }
        } catch (const DivergenceError&) {
            report.reason = StopReason::kDiverged;
            stopped = true;
        }
        epoch_loss.penalty = cfg.lambda * penalty(model.lags, cfg.penalty);
        report.history.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);

        const double avg = epoch_loss.average_per_series(n, T);
        averages.push_back(avg);
        if (stopped) break;

        if (!std::isfinite(epoch_loss.total()) || epoch_loss.total() > cfg.divergence_limit) {
            report.reason = StopReason::kDiverged;
            break;
        }
        // plateau test on window means: single-epoch averages are noisy under
        // minibatching, so compare the mean of the last `patience` epochs
        // against the mean of the window before it
        const auto w = static_cast<std::size_t>(cfg.patience);
        if (avg < cfg.stop_threshold && averages.size() >= 2 * w) {
            double last = 0.0, prev = 0.0;
            for (std::size_t k = 0; k < w; ++k) {
                last += averages[averages.size() - 1 - k] / static_cast<double>(w);
                prev += averages[averages.size() - 1 - w - k] / static_cast<double>(w);
            }
            if ((prev - last) / std::max(std::abs(prev), 1e-15) < cfg.min_rel_decrease) {
                report.reason = StopReason::kConverged;
                break;
            }
        }
    }

    report.epochs = static_cast<Index>(report.history.size());
    if (report.reason != StopReason::kDiverged) {
        if (report.reason != StopReason::kConverged) report.reason = StopReason::kMaxEpochs;
        report.final_loss = fit_terms(panel, forward_all(model, panel), cfg.max_lag);
        report.final_loss.penalty = cfg.lambda * penalty(model.lags, cfg.penalty);
        report.final_average = report.final_loss.average_per_series(n, T);
    } else if (!report.history.empty()) {
        report.final_loss = report.history.back();
        report.final_average = report.final_loss.average_per_series(n, T);
    }
    return {std::move(model), std::move(report)};
}

} // namespace nkdcd
