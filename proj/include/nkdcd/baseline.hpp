#pragma once

#include <cmath>
#include <vector>

#include "nkdcd/optim.hpp"

namespace nkdcd {

/// Linear vector autoregression with group-lasso sparsity, fitted by the same
/// gradient-then-prox machinery as the lifted model, with blocks of size 1x1
/// (a LagStack with lift_dim = 1), so both models share one shrinkage path.
struct LinearVarModel {
    LagStack lags; // lift_dim = 1: L plain n x n lag matrices
    TrainConfig config;
    std::vector<double> mean, scale; // per-series standardization used during the fit
    Index epochs = 0;
    double objective = 0.0; // final quadratic + penalty value (standardized scale)
};

namespace detail {

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double spectral_norm_psd(const Matrix& g) {
    Matrix v(g.rows(), 1);
    for (Index i = 0; i < g.rows(); ++i) v(i, 0) = 1.0 / std::sqrt(static_cast<double>(g.rows()));
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        Matrix w = matmul(g, v);
        const double norm = std::sqrt(w.squared_norm());
        if (norm == 0.0) return 0.0;
        w *= 1.0 / norm;
        lambda = norm;
        v = w;
    }
    return lambda;
}

inline LagStack stacked_to_lags(const Matrix& theta, Index n, Index L) {
    LagStack out(n, 1, L);
    for (Index l = 0; l < L; ++l)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                out.matrix(l)(i, j) = theta(l * n + j, i);
    return out;
}

inline Matrix lags_to_stacked(const LagStack& lags) {
    const Index n = lags.series(), L = lags.lags();
    Matrix theta(n * L, n);
    for (Index l = 0; l < L; ++l)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                theta(l * n + j, i) = lags.matrix(l)(i, j);
    return theta;
}

} // namespace detail

/// Proximal gradient fit of sum_t ||x_t - sum_l W_l x_{t-l}||^2 + lambda*Omega.
/// Uses the fields lambda, tau, max_lag, penalty, max_epochs, seed and
/// standardize of the config; the effective step is capped at the inverse
/// Lipschitz constant of the quadratic term, so any configured tau is stable.
/// Each series is z-scored before fitting (config.standardize, on by default)
/// and the returned lag matrices are mapped back to the raw scale.
inline LinearVarModel fit_var(const TimeSeriesData& data, const TrainConfig& cfg) {
    if (cfg.lambda < 0.0) throw ValidationError("fit_var: lambda must be >= 0");
    if (cfg.max_lag < 1) throw ValidationError("fit_var: max_lag must be >= 1");
    if (cfg.max_epochs < 1) throw ValidationError("fit_var: max_epochs must be >= 1");
    if (!(cfg.tau > 0.0)) throw ValidationError("fit_var: tau must be > 0");
    const Index T = data.length(), n = data.series(), L = cfg.max_lag;
    if (T <= L)
        throw ValidationError("fit_var: insufficient data, T=" + std::to_string(T) +
                              " must exceed max_lag=" + std::to_string(L));

    LinearVarModel model;
    model.config = cfg;
    model.mean.assign(static_cast<std::size_t>(n), 0.0);
    model.scale.assign(static_cast<std::size_t>(n), 1.0);

    Matrix panel = data.values;
    if (cfg.standardize) {
        for (Index j = 0; j < n; ++j) {
            double mean = panel.eigen().col(j).mean();
            double var = (panel.eigen().col(j).array() - mean).square().sum() /
                         static_cast<double>(T);
            const double sd = std::sqrt(var);
            model.mean[static_cast<std::size_t>(j)] = mean;
            model.scale[static_cast<std::size_t>(j)] = sd > 1e-12 ? sd : 1.0;
        }
        for (Index t = 0; t < T; ++t)
            for (Index j = 0; j < n; ++j)
                panel(t, j) = (panel(t, j) - model.mean[static_cast<std::size_t>(j)]) /
                              model.scale[static_cast<std::size_t>(j)];
    }

    // stacked regression: predict row t from [x_{t-1}, ..., x_{t-L}]
    Matrix target = panel.row_range(L, T - L);
    Matrix design(T - L, n * L);
    for (Index l = 1; l <= L; ++l)
        design.set_block(0, (l - 1) * n, panel.row_range(L - l, T - L));

    const Matrix gram = transposed_matmul(design, design);       // Z^T Z
    const Matrix cross = transposed_matmul(design, target);      // Z^T Y
    const double lipschitz = 2.0 * detail::spectral_norm_psd(gram);
    const double step = lipschitz > 0.0 ? std::min(cfg.tau, 0.99 / lipschitz) : cfg.tau;

    Matrix theta(n * L, n);
    double prev_objective = std::numeric_limits<double>::infinity();
    for (Index epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Matrix grad = matmul(gram, theta);
        grad -= cross;
        grad *= 2.0;
        theta.eigen() -= step * grad.eigen();
        LagStack shrunk =
            apply_prox(detail::stacked_to_lags(theta, n, L), cfg.penalty, step * cfg.lambda,
                       ProxReference::kIntermediate);
        theta = detail::lags_to_stacked(shrunk);

        const double quadratic = (target - matmul(design, theta)).squared_norm();
        const double objective = quadratic + cfg.lambda * penalty(shrunk, cfg.penalty);
        if (!std::isfinite(objective) || objective > cfg.divergence_limit)
            throw DivergenceError("fit_var: objective diverged", epoch);
        model.epochs = epoch + 1;
        model.objective = objective;
        if (prev_objective - objective >= 0.0 &&
            prev_objective - objective < 1e-10 * std::max(1.0, objective))
            break;
        prev_objective = objective;
    }

    model.lags = detail::stacked_to_lags(theta, n, L);
    if (cfg.standardize) {
        // back to raw scale: W_raw(i,j) = W_std(i,j) * s_i / s_j
        for (Index l = 0; l < L; ++l)
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j)
                    model.lags.matrix(l)(i, j) *= model.scale[static_cast<std::size_t>(i)] /
                                                  model.scale[static_cast<std::size_t>(j)];
    }
    return model;
}

} // namespace nkdcd
