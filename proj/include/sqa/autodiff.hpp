#pragma once

// Matrix-valued reverse-mode automatic differentiation.
//
// A Tape records every operation of one forward pass; Var is a cheap handle
// into it. Parameters live outside the tape and receive their gradients in a
// caller-owned sink (one matrix per parameter slot), so several tapes can run
// against the same parameters and have their gradients reduced in a fixed
// order afterwards.

#include "sqa/common.hpp"

#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <vector>

namespace sqa::ad {

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
    Tape<Scalar>* tape = nullptr;
    int id = -1;

    const MatrixX<Scalar>& value() const { return tape->value(*this); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    Scalar scalar() const { return value()(0, 0); }
    bool valid() const { return tape != nullptr; }
};

template <typename Scalar>
using GradientSink = std::vector<MatrixX<Scalar>>;

template <typename Scalar>
class Tape {
public:
    using Matrix = MatrixX<Scalar>;
    using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<Scalar> constant(Matrix value) { return push(std::move(value), false, {}); }

    /// Leaf bound to parameter `slot`; its gradient lands in sink[slot].
    Var<Scalar> parameter(const Matrix& value, int slot) {
        Var<Scalar> v = push(value, true, {});
        nodes_[v.id].slot = slot;
        return v;
    }

    /// Rows of a parameter table; gradient is scattered back into sink[slot].
    /// When sink[slot] is left empty the touched rows are collected in
    /// sparse_rows(slot) instead, which saves zeroing a large table per tape.
    Var<Scalar> gather_rows(const Matrix& table, int slot, std::vector<int> rows) {
        Matrix out(static_cast<Eigen::Index>(rows.size()), table.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(rows[i]);
        return push(std::move(out), true, [slot, rows = std::move(rows)](Tape& t, const Matrix& g) {
            Matrix& dst = t.sink_slot(slot);
            if (dst.size() == 0) {
                SparseRows& sparse = t.sparse_rows(slot);
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    auto [it, inserted] = sparse.try_emplace(rows[i], g.row(static_cast<Eigen::Index>(i)));
                    if (!inserted) it->second += g.row(static_cast<Eigen::Index>(i));
                }
                return;
            }
            for (std::size_t i = 0; i < rows.size(); ++i) dst.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        });
    }

    using SparseRows = std::map<int, Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>;

    SparseRows& sparse_rows(int slot) {
        if (static_cast<std::size_t>(slot) >= sparse_.size()) sparse_.resize(static_cast<std::size_t>(slot) + 1);
        return sparse_[static_cast<std::size_t>(slot)];
    }

    const Matrix& value(Var<Scalar> v) const { return nodes_[v.id].value; }
    bool requires_grad(Var<Scalar> v) const { return nodes_[v.id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Record an op. `backward` receives d(root)/d(output) and must push
    /// gradients into its inputs via accumulate().
    Var<Scalar> record(Matrix value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
        bool needs = false;
        for (const auto& in : inputs) needs = needs || requires_grad(in);
        if (!needs) return push(std::move(value), false, {});
        return push(std::move(value), true, std::move(backward));
    }

    Var<Scalar> record(Matrix value, std::span<const Var<Scalar>> inputs, Backward backward) {
        bool needs = false;
        for (const auto& in : inputs) needs = needs || requires_grad(in);
        if (!needs) return push(std::move(value), false, {});
        return push(std::move(value), true, std::move(backward));
    }

    template <typename Derived>
    void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
        Node& n = nodes_[v.id];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    /// Reverse sweep from a 1x1 root. Gradients are added into `sink`, whose
    /// entries must already be shaped like the parameters.
    void backward(Var<Scalar> root, GradientSink<Scalar>& sink) {
        assert(root.rows() == 1 && root.cols() == 1);
        sink_ = &sink;
        Node& r = nodes_[root.id];
        if (!r.requires_grad) return;
        r.grad = Matrix::Ones(1, 1);
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.requires_grad || n.grad.size() == 0) continue;
            if (n.slot >= 0) {
                sink[n.slot] += n.grad;
            } else if (n.backward) {
                n.backward(*this, n.grad);
            }
            n.grad.resize(0, 0);
        }
        sink_ = nullptr;
    }

    Matrix& sink_slot(int slot) { return (*sink_)[static_cast<std::size_t>(slot)]; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
        bool requires_grad = false;
        int slot = -1;
    };

    Var<Scalar> push(Matrix value, bool requires_grad, Backward backward) {
        nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), requires_grad, -1});
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
    std::vector<SparseRows> sparse_;
    GradientSink<Scalar>* sink_ = nullptr;
};

// ---------------------------------------------------------------------------
// Operations. Every function records onto the tape its first argument lives on.

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
    assert(a.cols() == b.rows());
    Tape<Scalar>& t = *a.tape;
    return t.record(a.value() * b.value(), {a, b}, [a, b](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
        if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
    });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
    assert(a.cols() == b.cols());
    Tape<Scalar>& t = *a.tape;
    return t.record(a.value() * b.value().transpose(), {a, b}, [a, b](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        if (t.requires_grad(a)) t.accumulate(a, g * b.value());
        if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
    });
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
    Tape<Scalar>& t = *a.tape;
    return t.record(a.value().transpose(), {a},
                    [a](Tape<Scalar>& t, const MatrixX<Scalar>& g) { t.accumulate(a, g.transpose()); });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
    assert(a.rows() == b.rows() && a.cols() == b.cols());
    Tape<Scalar>& t = *a.tape;
    return t.record(a.value() + b.value(), {a, b}, [a, b](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

/// a (n x m) plus a 1 x m row broadcast over every row.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
    assert(row.rows() == 1 && row.cols() == a.cols());
    Tape<Scalar>& t = *a.tape;
    MatrixX<Scalar> out = a.value().rowwise() + row.value().row(0);
    return t.record(std::move(out), {a, row}, [a, row](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        t.accumulate(a, g);
        if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
    });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
    Tape<Scalar>& t = *a.tape;
    return t.record(a.value() * c, {a}, [a, c](Tape<Scalar>& t, const MatrixX<Scalar>& g) { t.accumulate(a, g * c); });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
    Tape<Scalar>& t = *a.tape;
    MatrixX<Scalar> y = a.value().array().tanh().matrix();
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), {a}, [a, out_id](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        const auto& y = t.value(Var<Scalar>{&t, out_id});
        t.accumulate(a, (g.array() * (1 - y.array().square())).matrix());
    });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
    Tape<Scalar>& t = *a.tape;
    return t.record(a.value().cwiseMax(Scalar(0)), {a}, [a](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        t.accumulate(a, (g.array() * (a.value().array() > 0).template cast<Scalar>()).matrix());
    });
}

/// Softmax over each row.
template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> a) {
    Tape<Scalar>& t = *a.tape;
    const auto& x = a.value();
    MatrixX<Scalar> y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Scalar m = x.row(r).maxCoeff();
        y.row(r) = (x.row(r).array() - m).exp().matrix();
        y.row(r) /= y.row(r).sum();
    }
    const int out_id = static_cast<int>(t.size());
    return t.record(std::move(y), {a}, [a, out_id](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        const auto& y = t.value(Var<Scalar>{&t, out_id});
        MatrixX<Scalar> dot = (g.array() * y.array()).rowwise().sum().matrix();
        MatrixX<Scalar> dx = (y.array() * (g.colwise() - dot.col(0)).array()).matrix();
        t.accumulate(a, dx);
    });
}

/// Entrywise maximum over rows: n x d -> 1 x d. Ties resolve to the first row.
template <typename Scalar>
Var<Scalar> max_pool_rows(Var<Scalar> a) {
    Tape<Scalar>& t = *a.tape;
    const auto& x = a.value();
    assert(x.rows() >= 1);
    MatrixX<Scalar> y(1, x.cols());
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < x.rows(); ++r)
            if (x(r, c) > x(best, c)) best = r;
        arg[static_cast<std::size_t>(c)] = best;
        y(0, c) = x(best, c);
    }
    const Eigen::Index rows = x.rows();
    return t.record(std::move(y), {a}, [a, rows, arg = std::move(arg)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(rows, g.cols());
        for (Eigen::Index c = 0; c < g.cols(); ++c) dx(arg[static_cast<std::size_t>(c)], c) = g(0, c);
        t.accumulate(a, dx);
    });
}

/// Row i of the result is the entrywise max over rows groups[i] of `a`.
template <typename Scalar>
Var<Scalar> max_pool_groups(Var<Scalar> a, const std::vector<std::vector<int>>& groups) {
    Tape<Scalar>& t = *a.tape;
    const auto& x = a.value();
    const auto n = static_cast<Eigen::Index>(groups.size());
    MatrixX<Scalar> y(n, x.cols());
    std::vector<int> arg(static_cast<std::size_t>(n * x.cols()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& rows = groups[static_cast<std::size_t>(i)];
        assert(!rows.empty());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            int best = rows[0];
            for (int r : rows)
                if (x(r, c) > x(best, c)) best = r;
            arg[static_cast<std::size_t>(i * x.cols() + c)] = best;
            y(i, c) = x(best, c);
        }
    }
    const Eigen::Index in_rows = x.rows();
    return t.record(std::move(y), {a},
                    [a, in_rows, arg = std::move(arg)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                        MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(in_rows, g.cols());
                        for (Eigen::Index i = 0; i < g.rows(); ++i)
                            for (Eigen::Index c = 0; c < g.cols(); ++c)
                                dx(arg[static_cast<std::size_t>(i * g.cols() + c)], c) += g(i, c);
                        t.accumulate(a, dx);
                    });
}

template <typename Scalar>
Var<Scalar> row_block(Var<Scalar> a, Eigen::Index begin, Eigen::Index count) {
    Tape<Scalar>& t = *a.tape;
    const Eigen::Index rows = a.rows();
    return t.record(a.value().middleRows(begin, count), {a},
                    [a, begin, count, rows](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                        MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(rows, g.cols());
                        dx.middleRows(begin, count) = g;
                        t.accumulate(a, dx);
                    });
}

template <typename Scalar>
Var<Scalar> col_block(Var<Scalar> a, Eigen::Index begin, Eigen::Index count) {
    Tape<Scalar>& t = *a.tape;
    const Eigen::Index cols = a.cols();
    return t.record(a.value().middleCols(begin, count), {a},
                    [a, begin, count, cols](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                        MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(g.rows(), cols);
                        dx.middleCols(begin, count) = g;
                        t.accumulate(a, dx);
                    });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
    assert(!parts.empty());
    Tape<Scalar>& t = *parts.front().tape;
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.rows();
    MatrixX<Scalar> out(rows, parts.front().cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return t.record(std::move(out), std::span<const Var<Scalar>>(parts),
                    [parts](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                        Eigen::Index at = 0;
                        for (const auto& p : parts) {
                            if (t.requires_grad(p)) t.accumulate(p, g.middleRows(at, p.rows()));
                            at += p.rows();
                        }
                    });
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
    assert(!parts.empty());
    Tape<Scalar>& t = *parts.front().tape;
    Eigen::Index cols = 0;
    for (const auto& p : parts) cols += p.cols();
    MatrixX<Scalar> out(parts.front().rows(), cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return t.record(std::move(out), std::span<const Var<Scalar>>(parts),
                    [parts](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                        Eigen::Index at = 0;
                        for (const auto& p : parts) {
                            if (t.requires_grad(p)) t.accumulate(p, g.middleCols(at, p.cols()));
                            at += p.cols();
                        }
                    });
}

/// 1 x n -> 1 x length, entry i = a(0, index[i]); positions past index.size()
/// are zero.
template <typename Scalar>
Var<Scalar> select_pad(Var<Scalar> a, std::vector<int> index, Eigen::Index length) {
    assert(a.rows() == 1);
    Tape<Scalar>& t = *a.tape;
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(1, length);
    const auto used = std::min<Eigen::Index>(length, static_cast<Eigen::Index>(index.size()));
    for (Eigen::Index i = 0; i < used; ++i) out(0, i) = a.value()(0, index[static_cast<std::size_t>(i)]);
    index.resize(static_cast<std::size_t>(used));
    const Eigen::Index cols = a.cols();
    return t.record(std::move(out), {a}, [a, cols, index = std::move(index)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(1, cols);
        for (std::size_t i = 0; i < index.size(); ++i) dx(0, index[i]) += g(0, static_cast<Eigen::Index>(i));
        t.accumulate(a, dx);
    });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
    Tape<Scalar>& t = *a.tape;
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = a.value().sum();
    const Eigen::Index r = a.rows(), c = a.cols();
    return t.record(std::move(out), {a}, [a, r, c](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        t.accumulate(a, MatrixX<Scalar>::Constant(r, c, g(0, 0)));
    });
}

/// -log softmax(logits)[gold] for a 1 x m row.
template <typename Scalar>
Var<Scalar> cross_entropy(Var<Scalar> logits, int gold) {
    assert(logits.rows() == 1 && gold >= 0 && gold < logits.cols());
    Tape<Scalar>& t = *logits.tape;
    const auto& x = logits.value();
    const Scalar m = x.maxCoeff();
    const Scalar lse = m + std::log((x.array() - m).exp().sum());
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = lse - x(0, gold);
    return t.record(std::move(out), {logits}, [logits, gold, lse](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        MatrixX<Scalar> p = (logits.value().array() - lse).exp().matrix();
        p(0, gold) -= 1;
        t.accumulate(logits, p * g(0, 0));
    });
}

// Operator sugar for the common cases.
template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Var<Scalar> b) { return matmul(a, b); }

}  // namespace sqa::ad
