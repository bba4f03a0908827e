#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nkdcd/matrix.hpp"

namespace nkdcd::ad {

enum class OpKind {
    kConstant,
    kParameter,
    kAffine,       // x*w + b
    kLeakyRelu,
    kAdd,
    kSub,
    kMatmul,       // a*b
    kMatmulTransB, // a*b^T
    kSliceRows,
    kSliceCols,
    kConcatCols,
    kSquaredNorm,
};

struct NodeId {
    std::size_t index = static_cast<std::size_t>(-1);
};

/// Append-only computation graph over Matrix values.
///
/// Nodes are created strictly after their parents, so the tape order is a
/// topological order: the backward pass is one reverse sweep that visits each
/// node exactly once. Adjoints are zeroed at the start of every backward call.
class Tape {
public:
    NodeId constant(Matrix value) { return push(OpKind::kConstant, std::move(value), {}, false); }

    /// Leaf that participates in gradient computation. Copies the current value.
    NodeId parameter(const Matrix& value) {
        return push(OpKind::kParameter, value, {}, true);
    }

    NodeId affine(NodeId x, NodeId w, NodeId b) {
        Matrix v = affine_forward(value(x), value(w), value(b));
        return push(OpKind::kAffine, std::move(v), {x, w, b});
    }

    NodeId leaky_relu(NodeId y) {
        return push(OpKind::kLeakyRelu, nkdcd::leaky_relu(value(y)), {y});
    }

    NodeId add(NodeId a, NodeId b) {
        return push(OpKind::kAdd, value(a) + value(b), {a, b});
    }

    NodeId sub(NodeId a, NodeId b) {
        return push(OpKind::kSub, value(a) - value(b), {a, b});
    }

    NodeId matmul(NodeId a, NodeId b) {
        return push(OpKind::kMatmul, nkdcd::matmul(value(a), value(b)), {a, b});
    }

    /// a * b^T; the natural layout for applying lag matrices to row batches.
    NodeId matmul_transposed(NodeId a, NodeId b) {
        return push(OpKind::kMatmulTransB, nkdcd::matmul_transposed(value(a), value(b)), {a, b});
    }

    NodeId slice_rows(NodeId a, Index begin, Index count) {
        const Matrix& v = value(a);
        if (begin < 0 || count < 0 || begin + count > v.rows())
            throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") out of bounds for " + v.shape());
        NodeId id = push(OpKind::kSliceRows, v.row_range(begin, count), {a});
        nodes_[id.index].slice_begin = begin;
        return id;
    }

    NodeId slice_cols(NodeId a, Index begin, Index count) {
        const Matrix& v = value(a);
        if (begin < 0 || count < 0 || begin + count > v.cols())
            throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") out of bounds for " + v.shape());
        NodeId id = push(OpKind::kSliceCols, v.block(0, begin, v.rows(), count), {a});
        nodes_[id.index].slice_begin = begin;
        return id;
    }

    NodeId concat_cols(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw ValidationError("concat_cols: no parts given");
        Index rows = value(parts[0]).rows();
        Index cols = 0;
        for (NodeId p : parts) {
            if (value(p).rows() != rows)
                throw ShapeError("concat_cols: part is " + value(p).shape() + ", expected " +
                                 std::to_string(rows) + " rows");
            cols += value(p).cols();
        }
        Matrix v(rows, cols);
        Index off = 0;
        for (NodeId p : parts) {
            v.set_block(0, off, value(p));
            off += value(p).cols();
        }
        return push(OpKind::kConcatCols, std::move(v), parts);
    }

    /// Sum of squares of all entries, as a 1x1 node.
    NodeId squared_norm(NodeId a) {
        Matrix v(1, 1);
        v(0, 0) = value(a).squared_norm();
        return push(OpKind::kSquaredNorm, std::move(v), {a});
    }

    const Matrix& value(NodeId id) const { return nodes_.at(id.index).value; }

    std::size_t size() const { return nodes_.size(); }

    /// Reverse sweep from `loss` (must be 1x1). Afterwards gradient(p) holds
    /// d loss / d p for every parameter p created before the loss node.
    void backward(NodeId loss) {
        Node& root = nodes_.at(loss.index);
        if (root.value.rows() != 1 || root.value.cols() != 1)
            throw ValidationError("backward: loss node must be a 1x1 scalar, got " +
                                  root.value.shape());
        for (auto& n : nodes_) {
            if (n.needs_grad) n.adjoint = Matrix::zeros(n.value.rows(), n.value.cols());
        }
        if (!root.needs_grad) return; // loss depends on no parameter
        root.adjoint(0, 0) = 1.0;
        for (std::size_t i = loss.index + 1; i-- > 0;) {
            propagate(nodes_[i]);
        }
    }

    /// Accumulated adjoint of a gradient-tracked node after backward().
    const Matrix& gradient(NodeId id) const {
        const Node& n = nodes_.at(id.index);
        if (!n.needs_grad)
            throw ValidationError("gradient: node does not track gradients (constant)");
        return n.adjoint;
    }

private:
    struct Node {
        OpKind kind;
        Matrix value;
        Matrix adjoint;
        std::vector<NodeId> parents;
        Index slice_begin = 0;
        bool needs_grad = false;
    };

    NodeId push(OpKind kind, Matrix value, std::vector<NodeId> parents) {
        bool needs = false;
        for (NodeId p : parents) needs = needs || nodes_[p.index].needs_grad;
        return push(kind, std::move(value), std::move(parents), needs);
    }

    NodeId push(OpKind kind, Matrix value, std::vector<NodeId> parents, bool needs_grad) {
        Node n;
        n.kind = kind;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return NodeId{nodes_.size() - 1};
    }

    Matrix& adj(NodeId id) { return nodes_[id.index].adjoint; }
    bool tracked(NodeId id) const { return nodes_[id.index].needs_grad; }

    void propagate(Node& n) {
        if (!n.needs_grad) return;
        const Matrix& g = n.adjoint;
        switch (n.kind) {
        case OpKind::kConstant:
        case OpKind::kParameter:
            break;
        case OpKind::kAffine: {
            NodeId x = n.parents[0], w = n.parents[1], b = n.parents[2];
            if (tracked(x)) adj(x) += nkdcd::matmul_transposed(g, value(w));
            if (tracked(w)) adj(w) += nkdcd::transposed_matmul(value(x), g);
            if (tracked(b)) adj(b) += nkdcd::col_sums(g);
            break;
        }
        case OpKind::kLeakyRelu: {
            NodeId y = n.parents[0];
            if (tracked(y)) {
                Matrix& a = adj(y);
                const double* out = n.value.data();
                const double* grad = g.data();
                double* acc = a.data();
                for (Index k = 0; k < n.value.size(); ++k)
                    acc[k] += grad[k] * (out[k] >= 0.0 ? 1.0 : 0.1);
            }
            break;
        }
        case OpKind::kAdd:
            if (tracked(n.parents[0])) adj(n.parents[0]) += g;
            if (tracked(n.parents[1])) adj(n.parents[1]) += g;
            break;
        case OpKind::kSub:
            if (tracked(n.parents[0])) adj(n.parents[0]) += g;
            if (tracked(n.parents[1])) adj(n.parents[1]) -= g;
            break;
        case OpKind::kMatmul: {
            NodeId a = n.parents[0], b = n.parents[1];
            if (tracked(a)) adj(a) += nkdcd::matmul_transposed(g, value(b));
            if (tracked(b)) adj(b) += nkdcd::transposed_matmul(value(a), g);
            break;
        }
        case OpKind::kMatmulTransB: {
            NodeId a = n.parents[0], b = n.parents[1];
            if (tracked(a)) adj(a) += nkdcd::matmul(g, value(b));
            if (tracked(b)) adj(b) += nkdcd::transposed_matmul(g, value(a));
            break;
        }
        case OpKind::kSliceRows: {
            NodeId a = n.parents[0];
            if (tracked(a)) {
                Matrix& acc = adj(a);
                acc.eigen().middleRows(n.slice_begin, g.rows()) += g.eigen();
            }
            break;
        }
        case OpKind::kSliceCols: {
            NodeId a = n.parents[0];
            if (tracked(a)) {
                Matrix& acc = adj(a);
                acc.eigen().middleCols(n.slice_begin, g.cols()) += g.eigen();
            }
            break;
        }
        case OpKind::kConcatCols: {
            Index off = 0;
            for (NodeId p : n.parents) {
                Index w = value(p).cols();
                if (tracked(p))
                    adj(p).eigen() += g.eigen().middleCols(off, w);
                off += w;
            }
            break;
        }
        case OpKind::kSquaredNorm: {
            NodeId a = n.parents[0];
            if (tracked(a)) {
                Matrix scaled = value(a);
                scaled *= 2.0 * g(0, 0);
                adj(a) += scaled;
            }
            break;
        }
        }
    }

    std::vector<Node> nodes_;
};

} // namespace nkdcd::ad
