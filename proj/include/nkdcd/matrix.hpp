#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <string>

#include "nkdcd/errors.hpp"

namespace nkdcd {

using Index = Eigen::Index;

/// Dense row-major matrix of 64-bit reals. The storage and the heavy kernels
/// (matrix products) are delegated to Eigen; everything exported here keeps
/// row-major `data()` layout so serialization and tests can index flat arrays.
class Matrix {
public:
    using Storage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Matrix() = default;
    Matrix(Index rows, Index cols) : m_(Storage::Zero(rows, cols)) {}
    explicit Matrix(Storage s) : m_(std::move(s)) {}

    static Matrix zeros(Index rows, Index cols) { return Matrix(rows, cols); }

    static Matrix constant(Index rows, Index cols, double value) {
        return Matrix(Storage::Constant(rows, cols, value));
    }

    static Matrix identity(Index n) { return Matrix(Storage::Identity(n, n)); }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const Index r = static_cast<Index>(rows.size());
        const Index c = r > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
        Matrix out(r, c);
        Index i = 0;
        for (const auto& row : rows) {
            if (static_cast<Index>(row.size()) != c)
                throw ShapeError("from_rows: ragged initializer, row " + std::to_string(i) +
                                 " has " + std::to_string(row.size()) + " entries, expected " +
                                 std::to_string(c));
            Index j = 0;
            for (double v : row) out(i, j++) = v;
            ++i;
        }
        return out;
    }

    Index rows() const { return m_.rows(); }
    Index cols() const { return m_.cols(); }
    Index size() const { return m_.size(); }

    double& operator()(Index i, Index j) { return m_(i, j); }
    double operator()(Index i, Index j) const { return m_(i, j); }

    double* data() { return m_.data(); }
    const double* data() const { return m_.data(); }

    std::string shape() const {
        return std::to_string(rows()) + "x" + std::to_string(cols());
    }

    Matrix block(Index i0, Index j0, Index r, Index c) const {
        return Matrix(m_.block(i0, j0, r, c));
    }

    void set_block(Index i0, Index j0, const Matrix& src) {
        m_.block(i0, j0, src.rows(), src.cols()) = src.m_;
    }

    Matrix row_range(Index begin, Index count) const {
        return Matrix(m_.middleRows(begin, count));
    }

    Matrix col(Index j) const { return Matrix(m_.col(j)); }

    Matrix transposed() const { return Matrix(m_.transpose()); }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(*this, o, "operator+=");
        m_ += o.m_;
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        check_same_shape(*this, o, "operator-=");
        m_ -= o.m_;
        return *this;
    }

    Matrix& operator*=(double s) {
        m_ *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(double s, Matrix m) { return m *= s; }
    friend Matrix operator*(Matrix m, double s) { return m *= s; }

    bool operator==(const Matrix& o) const {
        return rows() == o.rows() && cols() == o.cols() && m_ == o.m_;
    }

    /// Sum of squares of all entries.
    double squared_norm() const { return m_.squaredNorm(); }

    double max_abs() const { return m_.size() == 0 ? 0.0 : m_.cwiseAbs().maxCoeff(); }

    bool all_finite() const { return m_.allFinite(); }

    Storage& eigen() { return m_; }
    const Storage& eigen() const { return m_; }

    static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
        if (a.rows() != b.rows() || a.cols() != b.cols())
            throw ShapeError(std::string(op) + ": shapes differ, lhs is " + a.shape() +
                             ", rhs is " + b.shape());
    }

private:
    Storage m_;
};

/// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree, lhs is " + a.shape() +
                         ", rhs is " + b.shape());
    Matrix out(a.rows(), b.cols());
    out.eigen().noalias() = a.eigen() * b.eigen();
    return out;
}

/// a * b^T
inline Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_transposed: inner dimensions disagree, lhs is " + a.shape() +
                         ", rhs^T is " + std::to_string(b.cols()) + "x" +
                         std::to_string(b.rows()));
    Matrix out(a.rows(), b.rows());
    out.eigen().noalias() = a.eigen() * b.eigen().transpose();
    return out;
}

/// a^T * b
inline Matrix transposed_matmul(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("transposed_matmul: inner dimensions disagree, lhs^T is " +
                         std::to_string(a.cols()) + "x" + std::to_string(a.rows()) +
                         ", rhs is " + b.shape());
    Matrix out(a.cols(), b.cols());
    out.eigen().noalias() = a.eigen().transpose() * b.eigen();
    return out;
}

/// x * w + b, with the bias row broadcast over every row of the product.
inline Matrix affine_forward(const Matrix& x, const Matrix& w, const Matrix& b) {
    if (x.cols() != w.rows())
        throw ShapeError("affine_forward: x is " + x.shape() + " but w is " + w.shape());
    if (b.rows() != 1 || b.cols() != w.cols())
        throw ShapeError("affine_forward: bias is " + b.shape() + ", expected 1x" +
                         std::to_string(w.cols()) + " to broadcast over x*w");
    Matrix out(x.rows(), w.cols());
    out.eigen().noalias() = x.eigen() * w.eigen();
    out.eigen().rowwise() += b.eigen().row(0);
    return out;
}

/// Elementwise max{0.1*y, y}.
inline Matrix leaky_relu(const Matrix& y) {
    Matrix out = y;
    double* p = out.data();
    for (Index k = 0; k < out.size(); ++k) p[k] = std::max(0.1 * p[k], p[k]);
    return out;
}

/// 1 x cols row of column sums.
inline Matrix col_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    out.eigen() = m.eigen().colwise().sum();
    return out;
}

} // namespace nkdcd
