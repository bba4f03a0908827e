#pragma once

#include <cmath>
#include <vector>

#include "nkdcd/model.hpp"

namespace nkdcd {

/// Which grouping the sparsity penalty (and its proximal operator) uses.
/// ulg groups all lags of a block pair jointly, hlg penalizes every lag
/// suffix, ilg treats each lag independently.
enum class PenaltyKind { kUlg, kHlg, kIlg };

/// The five loss components. The four data-fit terms are squared-L2 sums:
///   recon_autoencoder  sum_t ||x_t - recon_t||^2            over t in [1, T]
///   lifted_var         sum_t ||lifted_t - lifted_pred_t||^2 over t in (L, T]
///   nar_base           sum_t ||x_t - pred_t||^2             over t in (L, T]
///   nar_autoencoded    sum_t ||recon_t - pred_t||^2         over t in (L, T]
/// and `penalty` holds the weighted sparsity term.
struct LossBreakdown {
    double recon_autoencoder = 0.0;
    double lifted_var = 0.0;
    double nar_base = 0.0;
    double nar_autoencoded = 0.0;
    double penalty = 0.0;

    double fit_total() const {
        return recon_autoencoder + lifted_var + nar_base + nar_autoencoded;
    }

    double total() const { return fit_total() + penalty; }

    /// Average data-fit loss per scalar observation, the quantity the
    /// stopping rule thresholds.
    double average_per_series(Index series, Index length) const {
        return fit_total() / static_cast<double>(series * length);
    }

    LossBreakdown& operator+=(const LossBreakdown& o) {
        recon_autoencoder += o.recon_autoencoder;
        lifted_var += o.lifted_var;
        nar_base += o.nar_base;
        nar_autoencoded += o.nar_autoencoded;
        penalty += o.penalty;
        return *this;
    }
};

/// The four differentiable loss terms evaluated on full-panel trajectories.
/// The penalty field is left at zero.
inline LossBreakdown fit_terms(const Matrix& panel, const Trajectories& traj, Index max_lag) {
    const Index T = panel.rows();
    Matrix::check_same_shape(panel, traj.recon, "fit_terms: panel vs recon");
    if (traj.pred.rows() != T - max_lag)
        throw ShapeError("fit_terms: pred has " + std::to_string(traj.pred.rows()) +
                         " rows, expected " + std::to_string(T - max_lag));
    LossBreakdown out;
    out.recon_autoencoder = (panel - traj.recon).squared_norm();
    out.lifted_var = (traj.lifted.row_range(max_lag, T - max_lag) - traj.lifted_pred).squared_norm();
    out.nar_base = (panel.row_range(max_lag, T - max_lag) - traj.pred).squared_norm();
    out.nar_autoencoded = (traj.recon.row_range(max_lag, T - max_lag) - traj.pred).squared_norm();
    return out;
}

namespace detail {

/// Squared Frobenius norms of every block: sq[l][i*n + j] = ||W_l(i,j)||^2.
inline std::vector<std::vector<double>> block_squared_norms(const LagStack& lags) {
    const Index n = lags.series(), L = lags.lags();
    std::vector<std::vector<double>> sq(static_cast<std::size_t>(L));
    for (Index l = 0; l < L; ++l) {
        auto& row = sq[static_cast<std::size_t>(l)];
        row.resize(static_cast<std::size_t>(n * n));
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                row[static_cast<std::size_t>(i * n + j)] = lags.block_squared_norm(l, i, j);
    }
    return sq;
}

} // namespace detail

/// Group-lasso penalty of a lag stack. Every block norm is the entrywise L2
/// norm over the block's lift_dim^2 entries (per lag in scope of the group).
inline double penalty(const LagStack& lags, PenaltyKind kind) {
    const Index n = lags.series(), L = lags.lags();
    const auto sq = detail::block_squared_norms(lags);
    double sum = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            const auto ij = static_cast<std::size_t>(i * n + j);
            switch (kind) {
            case PenaltyKind::kUlg: {
                double s = 0.0;
                for (Index l = 0; l < L; ++l) s += sq[static_cast<std::size_t>(l)][ij];
                sum += std::sqrt(s);
                break;
            }
            case PenaltyKind::kHlg: {
                double s = 0.0;
                for (Index l = L; l-- > 0;) { // suffix sums, innermost lag last
                    s += sq[static_cast<std::size_t>(l)][ij];
                    sum += std::sqrt(s);
                }
                break;
            }
            case PenaltyKind::kIlg: {
                for (Index l = 0; l < L; ++l) sum += std::sqrt(sq[static_cast<std::size_t>(l)][ij]);
                break;
            }
            }
        }
    }
    return sum;
}

/// Scalar nodes of the four data-fit terms built over one batch of windows.
struct BatchLoss {
    ad::NodeId recon_autoencoder;
    ad::NodeId lifted_var;
    ad::NodeId nar_base;
    ad::NodeId nar_autoencoded;
    ad::NodeId fit_total;
};

/// Build the data-fit loss on a tape for a batch of prediction windows:
/// `current` holds the B target observations (rows) and `lagged[l-1]` the
/// observations l steps earlier. Reusable for full-data evaluation by
/// passing every valid window.
inline BatchLoss build_fit_loss(ad::Tape& tape, const NkdcdModel& model, const TapedParams& p,
                                const Matrix& current, const std::vector<Matrix>& lagged) {
    if (static_cast<Index>(lagged.size()) != model.max_lag)
        throw ShapeError("build_fit_loss: got " + std::to_string(lagged.size()) +
                         " lag batches, expected " + std::to_string(model.max_lag));
    for (const Matrix& m : lagged) Matrix::check_same_shape(current, m, "build_fit_loss");

    ad::NodeId x = tape.constant(current);
    ad::NodeId lifted_cur = lift_rows(tape, model, p, current);

    ad::NodeId lifted_pred{};
    for (Index l = 0; l < model.max_lag; ++l) {
        ad::NodeId term = tape.matmul_transposed(
            lift_rows(tape, model, p, lagged[static_cast<std::size_t>(l)]),
            p.lags[static_cast<std::size_t>(l)]);
        lifted_pred = (l == 0) ? term : tape.add(lifted_pred, term);
    }

    ad::NodeId recon = project_rows(tape, model, p, lifted_cur);
    ad::NodeId pred = project_rows(tape, model, p, lifted_pred);

    BatchLoss out;
    out.recon_autoencoder = tape.squared_norm(tape.sub(x, recon));
    out.lifted_var = tape.squared_norm(tape.sub(lifted_cur, lifted_pred));
    out.nar_base = tape.squared_norm(tape.sub(x, pred));
    out.nar_autoencoded = tape.squared_norm(tape.sub(recon, pred));
    out.fit_total = tape.add(tape.add(out.recon_autoencoder, out.lifted_var),
                             tape.add(out.nar_base, out.nar_autoencoded));
    return out;
}

} // namespace nkdcd
