// Finite-difference validation of every autodiff op used by the model.

#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "glint/core/autograd.hpp"

using namespace glint;
using ag::Mat;
using ag::Var;

namespace {

// central-difference check of d(scalar_fn)/d(leaf) against the tape
void grad_check(const std::function<Var(const std::vector<Var>&)>& fn,
                std::vector<Mat> inputs, double eps = 1e-6, double tol = 1e-6) {
    std::vector<Var> leaves;
    for (auto& m : inputs) leaves.push_back(ag::leaf(m, true));
    auto out = fn(leaves);
    ASSERT_EQ(out->val.size(), 1);
    ag::backward(out);

    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Mat analytic = leaves[li]->grad.size()
                           ? leaves[li]->grad
                           : Mat::Zero(inputs[li].rows(), inputs[li].cols());
        for (Eigen::Index i = 0; i < inputs[li].rows(); ++i)
            for (Eigen::Index j = 0; j < inputs[li].cols(); ++j) {
                auto eval = [&](double delta) {
                    std::vector<Var> ls;
                    for (std::size_t k = 0; k < inputs.size(); ++k) {
                        Mat m = inputs[k];
                        if (k == li) m(i, j) += delta;
                        ls.push_back(ag::leaf(m, false));
                    }
                    return fn(ls)->val(0, 0);
                };
                double num = (eval(eps) - eval(-eps)) / (2 * eps);
                double denom = std::max({1.0, std::abs(num), std::abs(analytic(i, j))});
                EXPECT_NEAR(analytic(i, j), num, tol * denom)
                    << "leaf " << li << " at (" << i << "," << j << ")";
            }
    }
}

Mat random_mat(Eigen::Index r, Eigen::Index c, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(rng);
    return m;
}

Var as_map(const Var& v, int c, int h, int w) {
    v->ch = c;
    v->sh = h;
    v->sw = w;
    return v;
}

}  // namespace

TEST(Autograd, MatmulAddScale) {
    grad_check(
        [](const std::vector<Var>& in) {
            return ag::mean_all(
                ag::scale(ag::add(ag::matmul(in[0], in[1]), in[2]), 1.7));
        },
        {random_mat(3, 4, 1), random_mat(4, 5, 2), random_mat(3, 5, 3)});
}

TEST(Autograd, SoftmaxRows) {
    grad_check(
        [](const std::vector<Var>& in) {
            return ag::mean_all(ag::mul(ag::softmax_rows(in[0]), in[1]));
        },
        {random_mat(4, 6, 4), random_mat(4, 6, 5)});
}

TEST(Autograd, SoftmaxRowsSumToOne) {
    auto x = ag::leaf(random_mat(7, 9, 11).array().abs().matrix() * 50.0);
    auto y = ag::softmax_rows(x);
    for (Eigen::Index i = 0; i < y->val.rows(); ++i)
        EXPECT_NEAR(y->val.row(i).sum(), 1.0, 1e-12);
}

TEST(Autograd, LayerNorm) {
    grad_check(
        [](const std::vector<Var>& in) {
            return ag::mean_all(
                ag::mul(ag::layernorm_rows(in[0], in[1], in[2]), in[3]));
        },
        {random_mat(3, 8, 6), random_mat(1, 8, 7).cwiseAbs(),
         random_mat(1, 8, 8), random_mat(3, 8, 9)},
        1e-6, 1e-5);
}

TEST(Autograd, GeluRelu) {
    grad_check(
        [](const std::vector<Var>& in) {
            return ag::mean_all(ag::add(ag::gelu(in[0]), ag::relu(in[0])));
        },
        {random_mat(5, 5, 10)});
}

TEST(Autograd, AbsAndMeanRows) {
    grad_check(
        [](const std::vector<Var>& in) {
            return ag::mean_all(
                ag::mul(ag::mean_rows(ag::abs_op(in[0])), in[1]));
        },
        {random_mat(6, 3, 12), random_mat(1, 3, 13)});
}

TEST(Autograd, ConcatSliceTranspose) {
    grad_check(
        [](const std::vector<Var>& in) {
            auto cat = ag::concat_cols({in[0], in[1]});
            auto s = ag::slice_cols(cat, 1, 4);
            auto r = ag::concat_rows({in[2], ag::transpose(s)});
            return ag::mean_all(ag::slice_rows(r, 1, 3));
        },
        {random_mat(3, 2, 14), random_mat(3, 4, 15), random_mat(1, 3, 16)});
}

TEST(Autograd, LinearBias) {
    grad_check(
        [](const std::vector<Var>& in) {
            return ag::mean_all(ag::linear(in[0], in[1], in[2]));
        },
        {random_mat(4, 3, 17), random_mat(5, 3, 18), random_mat(1, 5, 19)});
}

TEST(Autograd, Conv2d) {
    grad_check(
        [](const std::vector<Var>& in) {
            auto x = as_map(in[0], 2, 5, 5);
            return ag::mean_all(ag::conv2d(x, in[1], in[2], 3, 2, 1));
        },
        {random_mat(2, 25, 20), random_mat(3, 18, 21), random_mat(3, 1, 22)});
}

TEST(Autograd, Conv2dStrideEqualsKernel) {
    grad_check(
        [](const std::vector<Var>& in) {
            auto x = as_map(in[0], 3, 8, 8);
            return ag::mean_all(ag::conv2d(x, in[1], in[2], 4, 4, 0));
        },
        {random_mat(3, 64, 23), random_mat(6, 48, 24), random_mat(6, 1, 25)});
}

TEST(Autograd, MaxPool) {
    grad_check(
        [](const std::vector<Var>& in) {
            auto x = as_map(in[0], 2, 6, 6);
            return ag::mean_all(ag::maxpool2d(x, 2, 2));
        },
        {random_mat(2, 36, 26)});
}

TEST(Autograd, BackwardRequiresScalarRoot) {
    auto x = ag::leaf(random_mat(2, 2, 27), true);
    EXPECT_THROW(ag::backward(x), InputError);
}

TEST(Autograd, MatmulShapeMismatch) {
    auto a = ag::leaf(random_mat(2, 3, 28));
    auto b = ag::leaf(random_mat(4, 2, 29));
    EXPECT_THROW(ag::matmul(a, b), DimensionError);
}
