#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "nkdcd/inference.hpp"
#include "oracles.hpp"

using namespace nkdcd;

namespace {

/// Random scores with a controllable number of tied values.
Matrix random_scores(Index n, std::mt19937_64& rng, int distinct_levels = 0) {
    Matrix s(n, n);
    if (distinct_levels > 0) {
        std::uniform_int_distribution<int> level(0, distinct_levels - 1);
        for (Index k = 0; k < s.size(); ++k) s.data()[k] = 0.25 * level(rng);
    } else {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (Index k = 0; k < s.size(); ++k) s.data()[k] = dist(rng);
    }
    return s;
}

Matrix random_truth(Index n, std::mt19937_64& rng, double p = 0.4) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    while (true) {
        Matrix t(n, n);
        Index pos = 0;
        for (Index k = 0; k < t.size(); ++k) {
            t.data()[k] = dist(rng) < p ? 1.0 : 0.0;
            pos += t.data()[k] != 0.0 ? 1 : 0;
        }
        if (pos > 0 && pos < t.size()) return t;
    }
}

std::pair<std::vector<double>, std::vector<int>> flatten(const Matrix& s, const Matrix& t) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (Index i = 0; i < s.rows(); ++i)
        for (Index j = 0; j < s.cols(); ++j) {
            scores.push_back(s(i, j));
            labels.push_back(t(i, j) != 0.0 ? 1 : 0);
        }
    return {scores, labels};
}

} // namespace

TEST_CASE("score_gc") {
    SECTION("zero stack gives all-zero scores") {
        GcScores s = score_gc(LagStack(4, 3, 2));
        CHECK(s.scores.squared_norm() == 0.0);
        REQUIRE(s.per_lag.size() == 2);
    }
    SECTION("a single nonzero entry scores only its pair") {
        LagStack lags(8, 2, 3);
        Matrix block(2, 2);
        block(0, 0) = 4.0;
        lags.set_block(1, 2, 6, block); // lag 2 of pair (3,7) in 1-based terms
        GcScores s = score_gc(lags);
        CHECK(s.scores(2, 6) == 4.0);
        CHECK(s.per_lag[1](2, 6) == 4.0);
        CHECK(s.per_lag[0](2, 6) == 0.0);
        double rest = s.scores.squared_norm() - 16.0;
        CHECK(rest == 0.0);
    }
    SECTION("scores match an explicit group-norm recomputation") {
        std::mt19937_64 rng(5);
        LagStack lags(3, 2, 4);
        for (Index l = 0; l < 4; ++l) lags.matrix(l) = oracles::random_matrix(6, 6, rng);
        GcScores s = score_gc(lags);
        for (Index i = 0; i < 3; ++i)
            for (Index j = 0; j < 3; ++j) {
                double sq = 0.0;
                for (Index l = 0; l < 4; ++l)
                    for (Index a = 0; a < 2; ++a)
                        for (Index b = 0; b < 2; ++b) {
                            const double v = lags.matrix(l)(i * 2 + a, j * 2 + b);
                            sq += v * v;
                        }
                REQUIRE(s.scores(i, j) == Catch::Approx(std::sqrt(sq)).epsilon(1e-14));
            }
    }
    SECTION("scores are zero exactly when every lag block is zero") {
        LagStack lags(2, 2, 2);
        Matrix block(2, 2);
        block(1, 1) = 1e-300; // tiny but nonzero
        lags.set_block(0, 1, 0, block);
        GcScores s = score_gc(lags);
        CHECK(s.scores(1, 0) > 0.0);
        CHECK(s.scores(0, 1) == 0.0);
    }
}

TEST_CASE("threshold_adjacency") {
    Matrix scores = Matrix::from_rows({{0.5, 0.2}, {0.9, 0.0}});
    SECTION("zero threshold keeps strictly positive scores") {
        Matrix adj = threshold_adjacency(scores, 0.0);
        CHECK(adj(0, 0) == 1.0);
        CHECK(adj(0, 1) == 1.0);
        CHECK(adj(1, 0) == 1.0);
        CHECK(adj(1, 1) == 0.0); // 0 is not > 0
    }
    SECTION("threshold above the maximum clears everything") {
        CHECK(threshold_adjacency(scores, 1.0).squared_norm() == 0.0);
    }
    SECTION("a threshold between two values keeps exactly the larger") {
        Matrix adj = threshold_adjacency(scores, 0.4);
        CHECK(adj(0, 0) == 1.0);
        CHECK(adj(1, 0) == 1.0);
        CHECK(adj(0, 1) == 0.0);
    }
    SECTION("monotone: growing the threshold never adds edges") {
        std::mt19937_64 rng(8);
        Matrix s = random_scores(5, rng);
        for (double lo : {0.1, 0.3, 0.6}) {
            Matrix a_lo = threshold_adjacency(s, lo);
            Matrix a_hi = threshold_adjacency(s, lo + 0.2);
            for (Index k = 0; k < s.size(); ++k) CHECK(a_hi.data()[k] <= a_lo.data()[k]);
        }
    }
}

TEST_CASE("auroc") {
    SECTION("perfect ranking gives 1.0") {
        Matrix scores = Matrix::from_rows({{0.9, 0.8}, {0.1, 0.2}});
        Matrix truth = Matrix::from_rows({{1.0, 1.0}, {0.0, 0.0}});
        CHECK(auroc(scores, truth) == 1.0);
    }
    SECTION("all-equal scores give 0.5") {
        Matrix scores = Matrix::constant(3, 3, 0.7);
        std::mt19937_64 rng(2);
        Matrix truth = random_truth(3, rng);
        CHECK(auroc(scores, truth) == 0.5);
    }
    SECTION("3x3 hand case matches exhaustive pair counting") {
        Matrix scores = Matrix::from_rows({{0.9, 0.1, 0.5}, {0.5, 0.7, 0.3}, {0.2, 0.5, 0.8}});
        Matrix truth = Matrix::from_rows({{1.0, 0.0, 1.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
        auto [s, l] = flatten(scores, truth);
        CHECK(auroc(scores, truth) == Catch::Approx(oracles::auroc_pairs(s, l)).margin(1e-15));
    }
    SECTION("degenerate truth is an undefined metric") {
        Matrix scores = Matrix::constant(2, 2, 1.0);
        CHECK_THROWS_AS(auroc(scores, Matrix::constant(2, 2, 1.0)), NumericError);
        CHECK_THROWS_AS(auroc(scores, Matrix(2, 2)), NumericError);
    }
    SECTION("invariant under strictly increasing transforms") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 30; ++trial) {
            Matrix s = random_scores(4, rng, trial % 2 == 0 ? 3 : 0);
            Matrix t = random_truth(4, rng);
            Matrix mapped = s;
            for (Index k = 0; k < mapped.size(); ++k)
                mapped.data()[k] = std::exp(3.0 * mapped.data()[k]) + 1.0;
            CHECK(auroc(s, t) == Catch::Approx(auroc(mapped, t)).margin(1e-12));
        }
    }
    SECTION("include_self excludes the diagonal when asked") {
        Matrix scores = Matrix::from_rows({{1.0, 0.1}, {0.2, 0.9}});
        Matrix truth = Matrix::from_rows({{0.0, 0.0}, {1.0, 1.0}});
        // off-diagonal only: negative 0.1 vs positive 0.2 -> auroc 1.0;
        // with the diagonal the high-scored negative (0,0) pulls it to 0.5
        CHECK(auroc(scores, truth, false) == 1.0);
        CHECK(auroc(scores, truth, true) == 0.5);
    }
}

TEST_CASE("auroc equals Mann-Whitney pair counting and trapezoidal area") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 2 + static_cast<Index>(rng() % 4);
        Matrix s = random_scores(n, rng, trial % 3 == 0 ? 4 : 0);
        Matrix t = random_truth(n, rng);
        auto [scores, labels] = flatten(s, t);
        const double got = auroc(s, t);
        REQUIRE(got == Catch::Approx(oracles::auroc_pairs(scores, labels)).margin(1e-12));
        REQUIRE(got == Catch::Approx(oracles::auroc_trapezoid(scores, labels)).margin(1e-12));
    }
}

TEST_CASE("aupr") {
    SECTION("perfect ranking gives 1.0") {
        Matrix scores = Matrix::from_rows({{0.9, 0.8}, {0.1, 0.2}});
        Matrix truth = Matrix::from_rows({{1.0, 1.0}, {0.0, 0.0}});
        CHECK(aupr(scores, truth) == 1.0);
    }
    SECTION("all-tied scores give the positive prevalence") {
        Matrix scores(3, 3); // all zero: a single threshold step retrieves everything
        Matrix truth = Matrix::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
        CHECK(aupr(scores, truth) == Catch::Approx(3.0 / 9.0).margin(1e-15));
    }
    SECTION("matches brute-force threshold enumeration") {
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 100; ++trial) {
            const Index n = 2 + static_cast<Index>(rng() % 3);
            Matrix s = random_scores(n, rng, trial % 2 == 0 ? 3 : 0);
            Matrix t = random_truth(n, rng);
            auto [scores, labels] = flatten(s, t);
            REQUIRE(aupr(s, t) == Catch::Approx(oracles::aupr_sweep(scores, labels)).margin(1e-12));
        }
    }
}

TEST_CASE("evaluate assembles a consistent report") {
    std::mt19937_64 rng(31);
    LagStack lags(4, 2, 3);
    for (Index l = 0; l < 3; ++l) lags.matrix(l) = oracles::random_matrix(8, 8, rng, 0.0, 1.0);
    GcScores scores = score_gc(lags);
    Matrix truth = random_truth(4, rng);
    MetricsReport rep = evaluate(scores, truth, 0.5);

    CHECK(rep.auroc >= 0.0);
    CHECK(rep.auroc <= 1.0);
    CHECK(rep.aupr >= 0.0);
    CHECK(rep.aupr <= 1.0);
    CHECK(rep.auroc == auroc(scores, truth));
    CHECK(rep.aupr == aupr(scores, truth));

    SECTION("roc curve is monotone nondecreasing in both coordinates") {
        REQUIRE(rep.roc.size() >= 2);
        CHECK(rep.roc.front().fpr == 0.0);
        CHECK(rep.roc.front().tpr == 0.0);
        CHECK(rep.roc.back().fpr == 1.0);
        CHECK(rep.roc.back().tpr == 1.0);
        for (std::size_t k = 1; k < rep.roc.size(); ++k) {
            CHECK(rep.roc[k].fpr >= rep.roc[k - 1].fpr);
            CHECK(rep.roc[k].tpr >= rep.roc[k - 1].tpr);
        }
    }
    SECTION("confusion counts add up to the pair count") {
        CHECK(rep.confusion.tp + rep.confusion.fp + rep.confusion.tn + rep.confusion.fn == 16);
    }
    SECTION("adjacency in the report matches threshold_adjacency") {
        Matrix adj = threshold_adjacency(scores, 0.5);
        for (Index k = 0; k < adj.size(); ++k) CHECK(rep.adjacency.data()[k] == adj.data()[k]);
    }
}
