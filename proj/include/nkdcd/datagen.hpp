#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nkdcd/matrix.hpp"

namespace nkdcd {

struct Metadata {
    std::string generator;
    std::uint64_t seed = 0;
    std::string params; // human-readable parameter summary
};

/// A T x n panel of observations plus, for synthetic data, the ground-truth
/// adjacency: truth(i,j) = 1 means series j drives series i.
struct TimeSeriesData {
    Matrix values;
    std::optional<Matrix> truth;
    Metadata meta;

    Index length() const { return values.rows(); } // T
    Index series() const { return values.cols(); } // n
};

/// Z-score every column. Columns with (near-)zero variance are centered only.
inline Matrix standardize_columns(const Matrix& panel) {
    Matrix out = panel;
    const Index T = panel.rows();
    for (Index j = 0; j < panel.cols(); ++j) {
        const double mean = panel.eigen().col(j).mean();
        double var = 0.0;
        for (Index t = 0; t < T; ++t) {
            const double d = panel(t, j) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(T));
        const double scale = sd > 1e-12 ? sd : 1.0;
        for (Index t = 0; t < T; ++t) out(t, j) = (panel(t, j) - mean) / scale;
    }
    return out;
}

/// Simulate x_t = sum_l W_l x_{t-l} + e_t with e_t ~ N(0, noise_std^2) iid.
/// Missing history before t=0 is treated as zero. If `initial_rows` is given,
/// its rows seed the first time steps verbatim (noise-free).
/// Noise is drawn row-major (one row of n normals per time step), so a fixed
/// seed reproduces the panel bit for bit.
inline Matrix simulate_var(const std::vector<Matrix>& lag_matrices, Index T, double noise_std,
                           std::uint64_t seed, const Matrix* initial_rows = nullptr) {
    if (lag_matrices.empty()) throw ValidationError("simulate_var: no lag matrices given");
    const Index n = lag_matrices[0].rows();
    for (const Matrix& w : lag_matrices)
        if (w.rows() != n || w.cols() != n)
            throw ShapeError("simulate_var: lag matrix is " + w.shape() + ", expected " +
                             std::to_string(n) + "x" + std::to_string(n));
    const Index L = static_cast<Index>(lag_matrices.size());
    const Index k = initial_rows ? initial_rows->rows() : 0;
    if (initial_rows && initial_rows->cols() != n)
        throw ShapeError("simulate_var: initial rows are " + initial_rows->shape() +
                         ", expected " + std::to_string(n) + " columns");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix x(T, n);
    for (Index t = 0; t < T; ++t) {
        if (t < k) {
            for (Index i = 0; i < n; ++i) x(t, i) = (*initial_rows)(t, i);
            continue;
        }
        Matrix row(1, n);
        for (Index l = 1; l <= L && t - l >= 0; ++l)
            row += matmul_transposed(x.row_range(t - l, 1), lag_matrices[static_cast<std::size_t>(l - 1)]);
        for (Index i = 0; i < n; ++i)
            x(t, i) = row(0, i) + (noise_std > 0.0 ? noise_std * noise(rng) : 0.0);
    }
    return x;
}

/// Sparse order-3 autoregressive panel: every series depends on itself and on
/// one other randomly chosen series, with coupling weight on lags 1..3.
struct Var3Spec {
    Index n = 10;
    Index T = 1000;
    double coupling = 0.1;
    double self_coupling = 0.1;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

inline TimeSeriesData generate_var(const Var3Spec& spec) {
    if (spec.n < 2) throw ValidationError("generate_var: need n >= 2 to pick a partner series");
    if (spec.T <= 3) throw ValidationError("generate_var: need T > 3");

    // partner draws first, then the noise stream (fixed order for determinism)
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<Index> pick(0, spec.n - 2);
    std::vector<Index> partner(static_cast<std::size_t>(spec.n));
    for (Index i = 0; i < spec.n; ++i) {
        Index j = pick(rng);
        if (j >= i) ++j; // skip self
        partner[static_cast<std::size_t>(i)] = j;
    }

    Matrix w(spec.n, spec.n);
    Matrix truth(spec.n, spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        w(i, i) = spec.self_coupling;
        w(i, partner[static_cast<std::size_t>(i)]) = spec.coupling;
        truth(i, i) = 1.0;
        truth(i, partner[static_cast<std::size_t>(i)]) = 1.0;
    }
    std::vector<Matrix> lag_matrices(3, w); // same sparse coupling at lags 1..3

    TimeSeriesData out;
    out.values = simulate_var(lag_matrices, spec.T, spec.noise_std, rng());
    out.truth = truth;
    out.meta.generator = "var3";
    out.meta.seed = spec.seed;
    out.meta.params = "n=" + std::to_string(spec.n) + " T=" + std::to_string(spec.T) +
                      " coupling=" + std::to_string(spec.coupling) +
                      " noise_std=" + std::to_string(spec.noise_std);
    return out;
}

/// Time derivative of the cyclic advection-damping-forcing system:
/// dx(i)/dt = (x(i+1) - x(i-2)) * x(i-1) - x(i) + forcing, indices mod n.
inline std::vector<double> lorenz96_deriv(const std::vector<double>& x, double forcing) {
    const Index n = static_cast<Index>(x.size());
    if (n < 4)
        throw ValidationError("lorenz96_deriv: need n >= 4, got " + std::to_string(n));
    std::vector<double> d(x.size());
    for (Index i = 0; i < n; ++i) {
        const auto at = [&](Index k) { return x[static_cast<std::size_t>(((k % n) + n) % n)]; };
        d[static_cast<std::size_t>(i)] = (at(i + 1) - at(i - 2)) * at(i - 1) - at(i) + forcing;
    }
    return d;
}

struct Lorenz96Spec {
    Index n = 20;
    double forcing = 10.0;
    double dt_sample = 0.1;
    Index T = 1000;
    Index substeps = 10;     // RK4 steps per recorded sample
    Index burn_in = 1000;    // samples discarded so the trajectory is on the attractor
    double init_noise = 0.01; // uniform perturbation of the x = forcing start state
    std::uint64_t seed = 0;
    std::vector<double> initial_state; // when set, overrides the perturbed-forcing start
};

/// Classical RK4 integration sampled every dt_sample units. Ground truth marks
/// (i,j) for j in {i-2, i-1, i, i+1} mod n, the terms appearing in dx(i)/dt.
inline TimeSeriesData generate_lorenz96(const Lorenz96Spec& spec) {
    if (spec.n < 4) throw ValidationError("generate_lorenz96: need n >= 4");
    if (spec.T < 1 || spec.substeps < 1 || spec.burn_in < 0)
        throw ValidationError("generate_lorenz96: need T >= 1, substeps >= 1, burn_in >= 0");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> perturb(-spec.init_noise, spec.init_noise);
    std::vector<double> x(static_cast<std::size_t>(spec.n));
    if (!spec.initial_state.empty()) {
        if (static_cast<Index>(spec.initial_state.size()) != spec.n)
            throw ShapeError("generate_lorenz96: initial state has length " +
                             std::to_string(spec.initial_state.size()) + ", expected " +
                             std::to_string(spec.n));
        x = spec.initial_state;
    } else {
        for (auto& v : x) v = spec.forcing + (spec.init_noise > 0.0 ? perturb(rng) : 0.0);
    }

    const double h = spec.dt_sample / static_cast<double>(spec.substeps);
    const auto rk4_sample = [&](Index sample_index) {
        for (Index s = 0; s < spec.substeps; ++s) {
            const auto k1 = lorenz96_deriv(x, spec.forcing);
            std::vector<double> tmp(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
            const auto k2 = lorenz96_deriv(tmp, spec.forcing);
            for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
            const auto k3 = lorenz96_deriv(tmp, spec.forcing);
            for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
            const auto k4 = lorenz96_deriv(tmp, spec.forcing);
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for (double v : x)
            if (!std::isfinite(v))
                throw NumericError("generate_lorenz96: non-finite state at sample " +
                                   std::to_string(sample_index));
    };

    for (Index t = 0; t < spec.burn_in; ++t) rk4_sample(t - spec.burn_in);

    TimeSeriesData out;
    out.values = Matrix(spec.T, spec.n);
    for (Index t = 0; t < spec.T; ++t) {
        rk4_sample(t);
        for (Index i = 0; i < spec.n; ++i) out.values(t, i) = x[static_cast<std::size_t>(i)];
    }

    Matrix truth(spec.n, spec.n);
    for (Index i = 0; i < spec.n; ++i)
        for (Index off : {-2, -1, 0, 1})
            truth(i, ((i + off) % spec.n + spec.n) % spec.n) = 1.0;
    out.truth = truth;
    out.meta.generator = "lorenz96";
    out.meta.seed = spec.seed;
    out.meta.params = "n=" + std::to_string(spec.n) + " F=" + std::to_string(spec.forcing) +
                      " T=" + std::to_string(spec.T) + " dt=" + std::to_string(spec.dt_sample) +
                      " substeps=" + std::to_string(spec.substeps);
    return out;
}

} // namespace nkdcd
