#pragma once

// Minimal reverse-mode autodiff over dense double matrices. The graph is
// dynamic: every op allocates a node holding its value and a closure that
// routes the upstream gradient to its parents. Convolutional tensors are
// stored as (channels, h*w) matrices with the spatial extent kept in node
// metadata.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "glint/core/error.hpp"

namespace glint::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Mat val;
    Mat grad;
    bool requires_grad = false;
    bool is_leaf = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward;

    // spatial metadata, set when the node represents (channels, h*w) maps
    int ch = 0, sh = 0, sw = 0;

    void accum(const Mat& g) {
        if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
        grad += g;
    }
    void zero_grad() { grad.resize(0, 0); }
};

inline Var leaf(Mat v, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->requires_grad = requires_grad;
    n->is_leaf = true;
    return n;
}

inline Var make_op(Mat v, std::vector<Var> parents, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->parents = std::move(parents);
    bool rg = false;
    for (const auto& p : n->parents) rg = rg || p->requires_grad;
    n->requires_grad = rg;
    if (rg) n->backward = std::move(bw);
    // shape-preserving ops inherit spatial metadata from their first parent;
    // ops that change the layout overwrite it explicitly
    if (!n->parents.empty() && n->parents[0]->ch != 0 &&
        n->val.rows() == n->parents[0]->val.rows() &&
        n->val.cols() == n->parents[0]->val.cols()) {
        n->ch = n->parents[0]->ch;
        n->sh = n->parents[0]->sh;
        n->sw = n->parents[0]->sw;
    }
    return n;
}

// ---- elementary ops ----------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols())
        throw DimensionError("add: shape mismatch");
    return make_op(a->val + b->val, {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accum(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accum(n.grad);
    });
}

inline Var sub(const Var& a, const Var& b) {
    return make_op(a->val - b->val, {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accum(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accum(-n.grad);
    });
}

inline Var scale(const Var& a, double s) {
    return make_op(a->val * s, {a}, [s](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accum(n.grad * s);
    });
}

inline Var mul(const Var& a, const Var& b) {  // elementwise
    return make_op(a->val.cwiseProduct(b->val), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->accum(n.grad.cwiseProduct(n.parents[1]->val));
        if (n.parents[1]->requires_grad)
            n.parents[1]->accum(n.grad.cwiseProduct(n.parents[0]->val));
    });
}

inline Var matmul(const Var& a, const Var& b) {
    if (a->val.cols() != b->val.rows())
        throw DimensionError("matmul: inner dimensions disagree");
    return make_op(a->val * b->val, {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->accum(n.grad * n.parents[1]->val.transpose());
        if (n.parents[1]->requires_grad)
            n.parents[1]->accum(n.parents[0]->val.transpose() * n.grad);
    });
}

inline Var transpose(const Var& a) {
    return make_op(a->val.transpose(), {a}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accum(n.grad.transpose());
    });
}

// y = x + 1*b where b is a (1,c) row broadcast over rows of x
inline Var add_rowvec(const Var& x, const Var& b) {
    if (b->val.rows() != 1 || b->val.cols() != x->val.cols())
        throw DimensionError("add_rowvec: bias shape mismatch");
    Mat v = x->val.rowwise() + Eigen::RowVectorXd(b->val.row(0));
    return make_op(std::move(v), {x, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accum(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accum(n.grad.colwise().sum());
    });
}

// y = x + b broadcast over columns; b is (r,1)
inline Var add_colvec(const Var& x, const Var& b) {
    if (b->val.cols() != 1 || b->val.rows() != x->val.rows())
        throw DimensionError("add_colvec: bias shape mismatch");
    Mat v = x->val.colwise() + Eigen::VectorXd(b->val.col(0));
    return make_op(std::move(v), {x, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accum(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accum(n.grad.rowwise().sum());
    });
}

// x (N,in) * W^T (in,out) + b  — the standard dense layer
inline Var linear(const Var& x, const Var& W, const Var& b) {
    return add_rowvec(matmul(x, transpose(W)), b);
}

inline Var softmax_rows(const Var& a) {
    if (!a->val.allFinite()) throw NumericError("softmax: non-finite input");
    Mat v = a->val;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        Eigen::RowVectorXd r = v.row(i);
        double m = r.maxCoeff();
        r = (r.array() - m).exp();
        v.row(i) = r / r.sum();
    }
    return make_op(std::move(v), {a}, [](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat g(n.val.rows(), n.val.cols());
        for (Eigen::Index i = 0; i < n.val.rows(); ++i) {
            const auto y = n.val.row(i);
            double dot = n.grad.row(i).dot(y);
            g.row(i) = y.cwiseProduct((n.grad.row(i).array() - dot).matrix());
        }
        n.parents[0]->accum(g);
    });
}

inline Var relu(const Var& a) {
    return make_op(a->val.cwiseMax(0.0), {a}, [](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat mask = (n.parents[0]->val.array() > 0.0).cast<double>();
        n.parents[0]->accum(n.grad.cwiseProduct(mask));
    });
}

// exact (erf-based) GELU
inline Var gelu(const Var& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    Mat v = a->val.unaryExpr([](double x) {
        return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    });
    return make_op(std::move(v), {a}, [](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        constexpr double inv_sqrt2pi = 0.3989422804014326779;
        Mat d = n.parents[0]->val.unaryExpr([](double x) {
            double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        });
        n.parents[0]->accum(n.grad.cwiseProduct(d));
    });
}

inline Var layernorm_rows(const Var& x, const Var& gamma, const Var& beta,
                          double eps = 1e-6) {
    const Eigen::Index d = x->val.cols();
    Mat xhat(x->val.rows(), d);
    Eigen::VectorXd inv_std(x->val.rows());
    for (Eigen::Index i = 0; i < x->val.rows(); ++i) {
        double mu = x->val.row(i).mean();
        Eigen::RowVectorXd c = x->val.row(i).array() - mu;
        double var = c.squaredNorm() / static_cast<double>(d);
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = c * inv_std(i);
    }
    Mat v = (xhat.array().rowwise() * gamma->val.row(0).array()).rowwise() +
            beta->val.row(0).array();
    return make_op(std::move(v), {x, gamma, beta},
                   [xhat, inv_std](Node& n) {
        const Eigen::Index d = xhat.cols();
        const Var& x = n.parents[0];
        const Var& gamma = n.parents[1];
        const Var& beta = n.parents[2];
        if (gamma->requires_grad)
            gamma->accum(n.grad.cwiseProduct(xhat).colwise().sum());
        if (beta->requires_grad) beta->accum(n.grad.colwise().sum());
        if (!x->requires_grad) return;
        Mat gx(xhat.rows(), d);
        for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
            Eigen::RowVectorXd gy =
                n.grad.row(i).cwiseProduct(gamma->val.row(0));
            double m1 = gy.mean();
            double m2 = gy.cwiseProduct(xhat.row(i)).mean();
            gx.row(i) = inv_std(i) *
                        (gy.array() - m1 - xhat.row(i).array() * m2);
        }
        x->accum(gx);
    });
}

// concatenate along columns (feature axis for (N,d) token grids)
inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw InputError("concat_cols: empty");
    Eigen::Index rows = parts[0]->val.rows(), cols = 0;
    for (const auto& p : parts) {
        if (p->val.rows() != rows)
            throw DimensionError("concat_cols: row mismatch");
        cols += p->val.cols();
    }
    Mat v(rows, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p->val.cols()) = p->val;
        off += p->val.cols();
    }
    return make_op(std::move(v), parts, [](Node& n) {
        Eigen::Index off = 0;
        for (auto& p : n.parents) {
            if (p->requires_grad)
                p->accum(n.grad.middleCols(off, p->val.cols()));
            off += p->val.cols();
        }
    });
}

inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw InputError("concat_rows: empty");
    Eigen::Index cols = parts[0]->val.cols(), rows = 0;
    for (const auto& p : parts) {
        if (p->val.cols() != cols)
            throw DimensionError("concat_rows: column mismatch");
        rows += p->val.rows();
    }
    Mat v(rows, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleRows(off, p->val.rows()) = p->val;
        off += p->val.rows();
    }
    return make_op(std::move(v), parts, [](Node& n) {
        Eigen::Index off = 0;
        for (auto& p : n.parents) {
            if (p->requires_grad)
                p->accum(n.grad.middleRows(off, p->val.rows()));
            off += p->val.rows();
        }
    });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len) {
    if (start < 0 || start + len > a->val.cols())
        throw DimensionError("slice_cols: out of range");
    return make_op(a->val.middleCols(start, len), {a}, [start, len](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat g = Mat::Zero(n.parents[0]->val.rows(), n.parents[0]->val.cols());
        g.middleCols(start, len) = n.grad;
        n.parents[0]->accum(g);
    });
}

inline Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index len) {
    if (start < 0 || start + len > a->val.rows())
        throw DimensionError("slice_rows: out of range");
    return make_op(a->val.middleRows(start, len), {a}, [start, len](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat g = Mat::Zero(n.parents[0]->val.rows(), n.parents[0]->val.cols());
        g.middleRows(start, len) = n.grad;
        n.parents[0]->accum(g);
    });
}

// mean over rows: (N,d) -> (1,d)
inline Var mean_rows(const Var& a) {
    Mat v = a->val.colwise().mean();
    const double inv_n = 1.0 / static_cast<double>(a->val.rows());
    return make_op(std::move(v), {a}, [inv_n](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat g = (n.grad * inv_n).replicate(n.parents[0]->val.rows(), 1);
        n.parents[0]->accum(g);
    });
}

inline Var mean_all(const Var& a) {
    Mat v(1, 1);
    v(0, 0) = a->val.mean();
    const double inv_n = 1.0 / static_cast<double>(a->val.size());
    return make_op(std::move(v), {a}, [inv_n](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        n.parents[0]->accum(Mat::Constant(n.parents[0]->val.rows(),
                                          n.parents[0]->val.cols(),
                                          n.grad(0, 0) * inv_n));
    });
}

inline Var abs_op(const Var& a) {
    return make_op(a->val.cwiseAbs(), {a}, [](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat sign = n.parents[0]->val.unaryExpr(
            [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
        n.parents[0]->accum(n.grad.cwiseProduct(sign));
    });
}

// ---- convolution on (C, H*W) maps --------------------------------------

inline void check_map(const Var& x) {
    if (x->ch == 0 || x->val.rows() != x->ch ||
        x->val.cols() != static_cast<Eigen::Index>(x->sh) * x->sw)
        throw DimensionError("conv input lacks consistent spatial metadata");
}

namespace detail {

inline Mat im2col(const Mat& x, int c, int h, int w, int k, int stride,
                  int pad, int oh, int ow) {
    Mat cols = Mat::Zero(static_cast<Eigen::Index>(c) * k * k,
                         static_cast<Eigen::Index>(oh) * ow);
    for (int ci = 0; ci < c; ++ci)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ki) * k + kj;
                for (int oi = 0; oi < oh; ++oi) {
                    int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= h) continue;
                    for (int oj = 0; oj < ow; ++oj) {
                        int jj = oj * stride + kj - pad;
                        if (jj < 0 || jj >= w) continue;
                        cols(row, static_cast<Eigen::Index>(oi) * ow + oj) =
                            x(ci, static_cast<Eigen::Index>(ii) * w + jj);
                    }
                }
            }
    return cols;
}

inline void col2im_accum(const Mat& cols, Mat& gx, int c, int h, int w, int k,
                         int stride, int pad, int oh, int ow) {
    for (int ci = 0; ci < c; ++ci)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ki) * k + kj;
                for (int oi = 0; oi < oh; ++oi) {
                    int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= h) continue;
                    for (int oj = 0; oj < ow; ++oj) {
                        int jj = oj * stride + kj - pad;
                        if (jj < 0 || jj >= w) continue;
                        gx(ci, static_cast<Eigen::Index>(ii) * w + jj) +=
                            cols(row, static_cast<Eigen::Index>(oi) * ow + oj);
                    }
                }
            }
}

}  // namespace detail

// W: (C_out, C_in*k*k), b: (C_out, 1); returns maps (C_out, oh*ow)
inline Var conv2d(const Var& x, const Var& W, const Var& b, int k, int stride,
                  int pad) {
    check_map(x);
    const int c = x->ch, h = x->sh, w = x->sw;
    if (W->val.cols() != static_cast<Eigen::Index>(c) * k * k)
        throw DimensionError("conv2d: weight/input channel mismatch");
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    if (oh <= 0 || ow <= 0) throw DimensionError("conv2d: empty output");
    Mat cols = detail::im2col(x->val, c, h, w, k, stride, pad, oh, ow);
    Mat v = (W->val * cols).colwise() + Eigen::VectorXd(b->val.col(0));
    auto n = make_op(std::move(v), {x, W, b},
                     [cols, k, stride, pad, oh, ow](Node& n) {
        const Var& x = n.parents[0];
        const Var& W = n.parents[1];
        const Var& b = n.parents[2];
        if (W->requires_grad) W->accum(n.grad * cols.transpose());
        if (b->requires_grad) b->accum(n.grad.rowwise().sum());
        if (!x->requires_grad) return;
        Mat gcols = W->val.transpose() * n.grad;
        Mat gx = Mat::Zero(x->val.rows(), x->val.cols());
        detail::col2im_accum(gcols, gx, x->ch, x->sh, x->sw, k, stride, pad,
                             oh, ow);
        x->accum(gx);
    });
    n->ch = static_cast<int>(W->val.rows());
    n->sh = oh;
    n->sw = ow;
    return n;
}

inline Var maxpool2d(const Var& x, int k, int stride) {
    check_map(x);
    const int c = x->ch, h = x->sh, w = x->sw;
    const int oh = (h - k) / stride + 1;
    const int ow = (w - k) / stride + 1;
    if (oh <= 0 || ow <= 0) throw DimensionError("maxpool2d: empty output");
    Mat v(c, static_cast<Eigen::Index>(oh) * ow);
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> arg(
        c, static_cast<Eigen::Index>(oh) * ow);
    for (int ci = 0; ci < c; ++ci)
        for (int oi = 0; oi < oh; ++oi)
            for (int oj = 0; oj < ow; ++oj) {
                double best = -1e300;
                Eigen::Index bidx = 0;
                for (int ki = 0; ki < k; ++ki)
                    for (int kj = 0; kj < k; ++kj) {
                        Eigen::Index idx =
                            static_cast<Eigen::Index>(oi * stride + ki) * w +
                            (oj * stride + kj);
                        if (x->val(ci, idx) > best) {
                            best = x->val(ci, idx);
                            bidx = idx;
                        }
                    }
                v(ci, static_cast<Eigen::Index>(oi) * ow + oj) = best;
                arg(ci, static_cast<Eigen::Index>(oi) * ow + oj) = bidx;
            }
    auto n = make_op(std::move(v), {x}, [arg](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat gx = Mat::Zero(n.parents[0]->val.rows(), n.parents[0]->val.cols());
        for (Eigen::Index ci = 0; ci < arg.rows(); ++ci)
            for (Eigen::Index j = 0; j < arg.cols(); ++j)
                gx(ci, arg(ci, j)) += n.grad(ci, j);
        n.parents[0]->accum(gx);
    });
    n->ch = c;
    n->sh = oh;
    n->sw = ow;
    return n;
}

// reinterpret a (N,C) token grid as (C, h*w) maps (N == h*w)
inline Var tokens_to_maps(const Var& t, int h, int w) {
    if (t->val.rows() != static_cast<Eigen::Index>(h) * w)
        throw DimensionError("tokens_to_maps: N != h*w");
    auto n = transpose(t);
    n->ch = static_cast<int>(t->val.cols());
    n->sh = h;
    n->sw = w;
    return n;
}

inline Var maps_to_tokens(const Var& m) { return transpose(m); }

// ---- graph traversal ---------------------------------------------------

inline void topo_collect(const Var& n, std::unordered_set<Node*>& seen,
                         std::vector<Var>& order) {
    if (seen.count(n.get())) return;
    seen.insert(n.get());
    for (const auto& p : n->parents) topo_collect(p, seen, order);
    order.push_back(n);
}

// seeds the root with d(root)/d(root) = 1 and propagates
inline void backward(const Var& root) {
    if (root->val.size() != 1)
        throw InputError("backward: root must be scalar");
    std::unordered_set<Node*> seen;
    std::vector<Var> order;
    topo_collect(root, seen, order);
    root->accum(Mat::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward && (*it)->grad.size() != 0) (*it)->backward(**it);
}

}  // namespace glint::ag
