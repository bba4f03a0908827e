#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nkdcd/model.hpp"

namespace nkdcd {

/// Nonnegative causal-strength scores read off a lag stack. scores(i,j) is
/// zero exactly when every lag block (i,j) is zero, so the zero pattern is
/// the inferred non-causality structure. per_lag keeps the n x n block norms
/// of each lag for heat maps and lag-order readout.
struct GcScores {
    Matrix scores;               // n x n, joint norm across all lags
    std::vector<Matrix> per_lag; // L matrices of n x n block norms
};

inline GcScores score_gc(const LagStack& lags) {
    const Index n = lags.series(), L = lags.lags();
    GcScores out;
    out.scores = Matrix(n, n);
    out.per_lag.assign(static_cast<std::size_t>(L), Matrix(n, n));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            // underflow-safe accumulation keeps the zero pattern exact even
            // for subnormal block entries
            double joint = 0.0;
            for (Index l = 0; l < L; ++l) {
                const Index N = lags.lift_dim();
                const double bn = lags.matrix(l).eigen().block(i * N, j * N, N, N).stableNorm();
                out.per_lag[static_cast<std::size_t>(l)](i, j) = bn;
                joint = std::hypot(joint, bn);
            }
            out.scores(i, j) = joint;
        }
    }
    return out;
}

/// adjacency(i,j) = 1 iff scores(i,j) > epsilon.
inline Matrix threshold_adjacency(const Matrix& scores, double epsilon) {
    if (epsilon < 0.0) throw ValidationError("threshold_adjacency: epsilon must be >= 0");
    Matrix out(scores.rows(), scores.cols());
    for (Index i = 0; i < scores.rows(); ++i)
        for (Index j = 0; j < scores.cols(); ++j)
            out(i, j) = scores(i, j) > epsilon ? 1.0 : 0.0;
    return out;
}

inline Matrix threshold_adjacency(const GcScores& s, double epsilon) {
    return threshold_adjacency(s.scores, epsilon);
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct Confusion {
    Index tp = 0, fp = 0, tn = 0, fn = 0;
};

namespace detail {

struct ScoredPair {
    double score;
    bool positive;
};

inline std::vector<ScoredPair> collect_pairs(const Matrix& scores, const Matrix& truth,
                                             bool include_self) {
    if (scores.rows() != scores.cols() || truth.rows() != truth.cols() ||
        scores.rows() != truth.rows())
        throw ShapeError("metrics: scores are " + scores.shape() + ", truth is " + truth.shape() +
                         ", expected matching square matrices");
    std::vector<ScoredPair> pairs;
    pairs.reserve(static_cast<std::size_t>(scores.size()));
    for (Index i = 0; i < scores.rows(); ++i)
        for (Index j = 0; j < scores.cols(); ++j) {
            if (!include_self && i == j) continue;
            pairs.push_back({scores(i, j), truth(i, j) != 0.0});
        }
    Index positives = 0;
    for (const auto& p : pairs) positives += p.positive ? 1 : 0;
    if (positives == 0 || positives == static_cast<Index>(pairs.size()))
        throw NumericError("metrics: degenerate truth, need at least one positive and one "
                           "negative pair");
    return pairs;
}

/// Threshold sweep grouped at distinct score values, highest first.
/// Each step yields cumulative (tp, fp).
inline std::vector<std::pair<Index, Index>> sweep(std::vector<ScoredPair> pairs) {
    std::sort(pairs.begin(), pairs.end(),
              [](const ScoredPair& a, const ScoredPair& b) { return a.score > b.score; });
    std::vector<std::pair<Index, Index>> steps;
    Index tp = 0, fp = 0;
    std::size_t k = 0;
    while (k < pairs.size()) {
        const double s = pairs[k].score;
        while (k < pairs.size() && pairs[k].score == s) {
            if (pairs[k].positive) ++tp; else ++fp;
            ++k;
        }
        steps.emplace_back(tp, fp);
    }
    return steps;
}

} // namespace detail

/// Probability that a random positive pair outscores a random negative pair,
/// ties counted half (the rank-statistic formulation; identical to the
/// trapezoidal area under the tie-grouped ROC curve).
inline double auroc(const Matrix& scores, const Matrix& truth, bool include_self = true) {
    auto pairs = detail::collect_pairs(scores, truth, include_self);
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.score < b.score; });
    const double total = static_cast<double>(pairs.size());
    double positives = 0.0, rank_sum = 0.0;
    std::size_t k = 0;
    double rank = 1.0;
    while (k < pairs.size()) {
        std::size_t k2 = k;
        while (k2 < pairs.size() && pairs[k2].score == pairs[k].score) ++k2;
        const double tied = static_cast<double>(k2 - k);
        const double avg_rank = rank + (tied - 1.0) / 2.0;
        for (std::size_t m = k; m < k2; ++m) {
            if (pairs[m].positive) {
                positives += 1.0;
                rank_sum += avg_rank;
            }
        }
        rank += tied;
        k = k2;
    }
    const double negatives = total - positives;
    const double u = rank_sum - positives * (positives + 1.0) / 2.0;
    return u / (positives * negatives);
}

/// Area under precision vs recall with step-wise interpolation: precision at
/// each distinct-score step weighted by the recall it adds.
inline double aupr(const Matrix& scores, const Matrix& truth, bool include_self = true) {
    const auto pairs = detail::collect_pairs(scores, truth, include_self);
    Index total_pos = 0;
    for (const auto& p : pairs) total_pos += p.positive ? 1 : 0;
    double area = 0.0, prev_recall = 0.0;
    for (const auto& [tp, fp] : detail::sweep(pairs)) {
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

inline double auroc(const GcScores& s, const Matrix& truth, bool include_self = true) {
    return auroc(s.scores, truth, include_self);
}

inline double aupr(const GcScores& s, const Matrix& truth, bool include_self = true) {
    return aupr(s.scores, truth, include_self);
}

/// Everything the results file needs: both areas, the tie-grouped curves,
/// the adjacency at the requested threshold, and its confusion counts.
struct MetricsReport {
    double auroc = 0.0;
    double aupr = 0.0;
    std::vector<RocPoint> roc;
    std::vector<PrPoint> pr;
    Matrix adjacency;
    Confusion confusion;
    double epsilon = 0.0;
    bool include_self = true;
};

inline MetricsReport evaluate(const GcScores& scores, const Matrix& truth, double epsilon,
                              bool include_self = true) {
    MetricsReport out;
    out.epsilon = epsilon;
    out.include_self = include_self;
    out.auroc = auroc(scores.scores, truth, include_self);
    out.aupr = aupr(scores.scores, truth, include_self);

    const auto pairs = detail::collect_pairs(scores.scores, truth, include_self);
    Index total_pos = 0;
    for (const auto& p : pairs) total_pos += p.positive ? 1 : 0;
    const Index total_neg = static_cast<Index>(pairs.size()) - total_pos;

    out.roc.push_back({0.0, 0.0});
    for (const auto& [tp, fp] : detail::sweep(pairs)) {
        out.roc.push_back({static_cast<double>(fp) / static_cast<double>(total_neg),
                           static_cast<double>(tp) / static_cast<double>(total_pos)});
        out.pr.push_back({static_cast<double>(tp) / static_cast<double>(total_pos),
                          static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }

    out.adjacency = threshold_adjacency(scores.scores, epsilon);
    for (Index i = 0; i < truth.rows(); ++i)
        for (Index j = 0; j < truth.cols(); ++j) {
            if (!include_self && i == j) continue;
            const bool predicted = out.adjacency(i, j) != 0.0;
            const bool actual = truth(i, j) != 0.0;
            if (predicted && actual) ++out.confusion.tp;
            else if (predicted && !actual) ++out.confusion.fp;
            else if (!predicted && actual) ++out.confusion.fn;
            else ++out.confusion.tn;
        }
    return out;
}

} // namespace nkdcd
