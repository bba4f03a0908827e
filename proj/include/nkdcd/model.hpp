#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "nkdcd/autodiff.hpp"
#include "nkdcd/matrix.hpp"

namespace nkdcd {

enum class Activation { kLeakyRelu, kLinear };

struct AffineLayer {
    Matrix weights;
    Matrix bias; // 1 x out
};

/// Three affine layers with the activation applied after the first two.
/// Used for both the lifting map (1 -> h/2 -> h -> N) and the projection
/// map (N -> h -> h/2 -> 1); rows of the input are independent samples.
class Mlp3 {
public:
    Mlp3() = default;

    Mlp3(Index in, Index mid1, Index mid2, Index out, Activation act, bool use_bias)
        : activation_(act), use_bias_(use_bias) {
        layers_[0] = {Matrix(in, mid1), Matrix(1, mid1)};
        layers_[1] = {Matrix(mid1, mid2), Matrix(1, mid2)};
        layers_[2] = {Matrix(mid2, out), Matrix(1, out)};
    }

    Index in_dim() const { return layers_[0].weights.rows(); }
    Index out_dim() const { return layers_[2].weights.cols(); }

    AffineLayer& layer(int i) { return layers_.at(static_cast<std::size_t>(i)); }
    const AffineLayer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }

    Activation activation() const { return activation_; }
    bool bias_enabled() const { return use_bias_; }

    /// Glorot-uniform weights, zero biases. Entries are drawn row-major,
    /// layer by layer, so a fixed seed reproduces weights exactly.
    void init_glorot(std::mt19937_64& rng) {
        for (auto& l : layers_) {
            const double a = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
            std::uniform_real_distribution<double> dist(-a, a);
            double* p = l.weights.data();
            for (Index k = 0; k < l.weights.size(); ++k) p[k] = dist(rng);
            l.bias = Matrix(1, l.bias.cols());
        }
    }

    Matrix forward(const Matrix& x) const {
        Matrix h1 = activate(affine_forward(x, layers_[0].weights, layers_[0].bias));
        Matrix h2 = activate(affine_forward(h1, layers_[1].weights, layers_[1].bias));
        return affine_forward(h2, layers_[2].weights, layers_[2].bias);
    }

    /// Parameter handles in the fixed order w1,b1,w2,b2,w3,b3.
    std::array<ad::NodeId, 6> register_on(ad::Tape& tape) const {
        std::array<ad::NodeId, 6> ids;
        for (int i = 0; i < 3; ++i) {
            ids[static_cast<std::size_t>(2 * i)] = tape.parameter(layers_[static_cast<std::size_t>(i)].weights);
            ids[static_cast<std::size_t>(2 * i + 1)] = tape.parameter(layers_[static_cast<std::size_t>(i)].bias);
        }
        return ids;
    }

    ad::NodeId forward(ad::Tape& tape, ad::NodeId x, const std::array<ad::NodeId, 6>& p) const {
        ad::NodeId h1 = activate(tape, tape.affine(x, p[0], p[1]));
        ad::NodeId h2 = activate(tape, tape.affine(h1, p[2], p[3]));
        return tape.affine(h2, p[4], p[5]);
    }

private:
    Matrix activate(Matrix m) const {
        return activation_ == Activation::kLeakyRelu ? leaky_relu(m) : m;
    }

    ad::NodeId activate(ad::Tape& tape, ad::NodeId id) const {
        return activation_ == Activation::kLeakyRelu ? tape.leaky_relu(id) : id;
    }

    std::array<AffineLayer, 3> layers_;
    Activation activation_ = Activation::kLeakyRelu;
    bool use_bias_ = true;
};

/// Lifting map applied to each scalar series element: 1 -> h/2 -> h -> N.
inline Mlp3 make_encoder(Index width, Index lift_dim, Activation act, bool use_bias = true) {
    if (width < 2 || width % 2 != 0)
        throw ValidationError("encoder width h must be even and >= 2, got " + std::to_string(width));
    if (lift_dim < 1)
        throw ValidationError("lift dimension N must be >= 1, got " + std::to_string(lift_dim));
    return Mlp3(1, width / 2, width, lift_dim, act, use_bias);
}

/// Projection map, mirror image of the encoder: N -> h -> h/2 -> 1.
inline Mlp3 make_decoder(Index width, Index lift_dim, Activation act, bool use_bias = true) {
    if (width < 2 || width % 2 != 0)
        throw ValidationError("decoder width h must be even and >= 2, got " + std::to_string(width));
    if (lift_dim < 1)
        throw ValidationError("lift dimension N must be >= 1, got " + std::to_string(lift_dim));
    return Mlp3(lift_dim, width, width / 2, 1, act, use_bias);
}

/// L square lag matrices of side series*lift_dim, addressable as series x series
/// blocks of lift_dim x lift_dim. Block (i,j) couples source series j to target
/// series i and occupies rows [i*N, (i+1)*N), cols [j*N, (j+1)*N).
class LagStack {
public:
    LagStack() = default;

    LagStack(Index series, Index lift_dim, Index lags) : n_(series), N_(lift_dim), L_(lags) {
        if (series < 1 || lift_dim < 1 || lags < 1)
            throw ValidationError("LagStack needs series >= 1, lift_dim >= 1, lags >= 1, got " +
                                  std::to_string(series) + ", " + std::to_string(lift_dim) +
                                  ", " + std::to_string(lags));
        mats_.assign(static_cast<std::size_t>(lags), Matrix(series * lift_dim, series * lift_dim));
    }

    Index series() const { return n_; }
    Index lift_dim() const { return N_; }
    Index lags() const { return L_; }
    Index side() const { return n_ * N_; }

    Matrix& matrix(Index lag) { return mats_.at(static_cast<std::size_t>(lag)); }
    const Matrix& matrix(Index lag) const { return mats_.at(static_cast<std::size_t>(lag)); }

    Matrix block(Index lag, Index i, Index j) const {
        return matrix(lag).block(i * N_, j * N_, N_, N_);
    }

    void set_block(Index lag, Index i, Index j, const Matrix& b) {
        matrix(lag).set_block(i * N_, j * N_, b);
    }

    double block_squared_norm(Index lag, Index i, Index j) const {
        return matrix(lag).eigen().block(i * N_, j * N_, N_, N_).squaredNorm();
    }

    void scale_block(Index lag, Index i, Index j, double factor) {
        matrix(lag).eigen().block(i * N_, j * N_, N_, N_) *= factor;
    }

    void init_uniform(std::mt19937_64& rng, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& m : mats_) {
            double* p = m.data();
            for (Index k = 0; k < m.size(); ++k) p[k] = dist(rng);
        }
    }

    bool all_finite() const {
        for (const auto& m : mats_)
            if (!m.all_finite()) return false;
        return true;
    }

private:
    Index n_ = 0, N_ = 0, L_ = 0;
    std::vector<Matrix> mats_;
};

/// The learned triple: lifting map, lag matrices in the lifted space, and
/// projection map, with the dimensions tying them together.
struct NkdcdModel {
    Mlp3 encoder;
    Mlp3 decoder;
    LagStack lags;
    Index series = 0;   // n
    Index lift_dim = 0; // N
    Index max_lag = 0;  // L

    /// Fresh model with Glorot-uniform nets and lag entries uniform in
    /// [-0.01, 0.01] (small enough to train, large enough that the first
    /// proximal step does not wipe every group).
    static NkdcdModel init(Index series, Index lift_dim, Index max_lag, Index width,
                           Activation act, bool use_bias, std::uint64_t seed) {
        NkdcdModel m;
        m.encoder = make_encoder(width, lift_dim, act, use_bias);
        m.decoder = make_decoder(width, lift_dim, act, use_bias);
        m.lags = LagStack(series, lift_dim, max_lag);
        m.series = series;
        m.lift_dim = lift_dim;
        m.max_lag = max_lag;
        std::mt19937_64 rng(seed);
        m.encoder.init_glorot(rng);
        m.decoder.init_glorot(rng);
        m.lags.init_uniform(rng, 0.01);
        return m;
    }

    /// Element-wise lift of one observation: block i of the result is the
    /// encoding of x[i]. Every element goes through the same shared net.
    std::vector<double> lift(const std::vector<double>& x) const {
        if (static_cast<Index>(x.size()) != series)
            throw ShapeError("lift: input has length " + std::to_string(x.size()) +
                             ", expected " + std::to_string(series));
        Matrix in(series, 1);
        for (Index i = 0; i < series; ++i) in(i, 0) = x[static_cast<std::size_t>(i)];
        Matrix out = encoder.forward(in); // series x N, row i = block i
        return {out.data(), out.data() + out.size()};
    }

    /// One-step prediction in the lifted space from exactly L past lifted
    /// vectors ordered most-recent-first.
    std::vector<double> predict_lifted(const std::vector<std::vector<double>>& history) const {
        if (static_cast<Index>(history.size()) < max_lag)
            throw ValidationError("predict_lifted: insufficient history, got " +
                                  std::to_string(history.size()) + " lifted vectors, need " +
                                  std::to_string(max_lag));
        if (static_cast<Index>(history.size()) > max_lag)
            throw ValidationError("predict_lifted: expected exactly " + std::to_string(max_lag) +
                                  " lifted vectors, got " + std::to_string(history.size()));
        const Index d = lags.side();
        Matrix sum(1, d);
        for (Index l = 0; l < max_lag; ++l) {
            const auto& h = history[static_cast<std::size_t>(l)];
            if (static_cast<Index>(h.size()) != d)
                throw ShapeError("predict_lifted: history entry has length " +
                                 std::to_string(h.size()) + ", expected " + std::to_string(d));
            Matrix row(1, d);
            for (Index k = 0; k < d; ++k) row(0, k) = h[static_cast<std::size_t>(k)];
            sum += matmul_transposed(row, lags.matrix(l));
        }
        return {sum.data(), sum.data() + sum.size()};
    }

    /// Element-wise projection back to the base space.
    std::vector<double> project(const std::vector<double>& lifted) const {
        if (static_cast<Index>(lifted.size()) != series * lift_dim)
            throw ShapeError("project: input has length " + std::to_string(lifted.size()) +
                             ", expected " + std::to_string(series * lift_dim));
        Matrix in(series, lift_dim);
        std::copy(lifted.begin(), lifted.end(), in.data());
        Matrix out = decoder.forward(in); // series x 1
        return {out.data(), out.data() + out.size()};
    }
};

/// The four trajectories of one full forward pass over a T x n panel.
/// Rows index time; `lifted_pred` and `pred` start at t = L, so their row r
/// corresponds to panel row L + r.
struct Trajectories {
    Matrix lifted;      // T x (n*N), lifted series
    Matrix lifted_pred; // (T-L) x (n*N), lag-model prediction in lifted space
    Matrix pred;        // (T-L) x n, prediction projected to base space
    Matrix recon;       // T x n, autoencoder reconstruction of the panel
};

inline Trajectories forward_all(const NkdcdModel& model, const Matrix& panel) {
    const Index T = panel.rows();
    const Index n = model.series;
    const Index N = model.lift_dim;
    const Index L = model.max_lag;
    if (panel.cols() != n)
        throw ShapeError("forward_all: panel is " + panel.shape() + ", expected " +
                         std::to_string(n) + " columns");
    if (T <= L)
        throw ValidationError("forward_all: insufficient data, T=" + std::to_string(T) +
                              " must exceed max lag L=" + std::to_string(L));

    Trajectories out;
    out.lifted = Matrix(T, n * N);
    for (Index i = 0; i < n; ++i)
        out.lifted.set_block(0, i * N, model.encoder.forward(panel.col(i)));

    out.lifted_pred = Matrix(T - L, n * N);
    for (Index l = 1; l <= L; ++l)
        out.lifted_pred += matmul_transposed(out.lifted.row_range(L - l, T - L),
                                             model.lags.matrix(l - 1));

    out.recon = Matrix(T, n);
    out.pred = Matrix(T - L, n);
    for (Index i = 0; i < n; ++i) {
        out.recon.set_block(0, i, model.decoder.forward(out.lifted.block(0, i * N, T, N)));
        out.pred.set_block(0, i, model.decoder.forward(out.lifted_pred.block(0, i * N, T - L, N)));
    }
    return out;
}

/// Tape handles for every trainable matrix of a model.
struct TapedParams {
    std::array<ad::NodeId, 6> encoder;
    std::array<ad::NodeId, 6> decoder;
    std::vector<ad::NodeId> lags;
};

inline TapedParams register_parameters(ad::Tape& tape, const NkdcdModel& model) {
    TapedParams p;
    p.encoder = model.encoder.register_on(tape);
    p.decoder = model.decoder.register_on(tape);
    p.lags.reserve(static_cast<std::size_t>(model.max_lag));
    for (Index l = 0; l < model.max_lag; ++l)
        p.lags.push_back(tape.parameter(model.lags.matrix(l)));
    return p;
}

/// Lift a B x n batch of observations on the tape: per-series columns go
/// through the shared encoder and are concatenated in series order.
inline ad::NodeId lift_rows(ad::Tape& tape, const NkdcdModel& model, const TapedParams& p,
                            const Matrix& rows) {
    std::vector<ad::NodeId> blocks;
    blocks.reserve(static_cast<std::size_t>(model.series));
    for (Index i = 0; i < model.series; ++i)
        blocks.push_back(model.encoder.forward(tape, tape.constant(rows.col(i)), p.encoder));
    return tape.concat_cols(blocks);
}

/// Project a B x (n*N) lifted node back to B x n, block by block.
inline ad::NodeId project_rows(ad::Tape& tape, const NkdcdModel& model, const TapedParams& p,
                               ad::NodeId lifted) {
    std::vector<ad::NodeId> cols;
    cols.reserve(static_cast<std::size_t>(model.series));
    for (Index i = 0; i < model.series; ++i) {
        ad::NodeId blk = tape.slice_cols(lifted, i * model.lift_dim, model.lift_dim);
        cols.push_back(model.decoder.forward(tape, blk, p.decoder));
    }
    return tape.concat_cols(cols);
}

} // namespace nkdcd
