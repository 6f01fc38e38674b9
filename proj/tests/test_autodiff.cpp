#include "mgsgan/errors.hpp"
#include "mgsgan/tensor.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace mgsgan;
using namespace mgsgan::testing;
using ad::Tensor;

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
    const auto& op = GetParam();
    Rng rng(std::hash<std::string>{}(op.name));
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = op.make(rng);
        const auto rep = check_gradients(c, rng);
        ASSERT_GT(rep.checked, 0u);
        EXPECT_LT(rep.max_rel_error, 1e-4) << op.name << " trial " << trial;
    }
}

INSTANTIATE_TEST_SUITE_P(Catalog, OpGradient, ::testing::ValuesIn(op_catalog()),
                         [](const auto& info) { return info.param.name; });

TEST(Backward, AccumulatesAcrossCalls) {
    auto x = leaf({3}, {1.0, 2.0, 3.0});
    ad::backward(ad::sum(ad::mul(x, x)));
    ad::backward(ad::sum(x));
    ASSERT_TRUE(x.has_grad());
    EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 5.0);
    EXPECT_DOUBLE_EQ(x.grad()[2], 7.0);
}

TEST(Backward, SharedSubexpressionGetsBothPaths) {
    auto x = leaf({1}, {2.0});
    auto y = ad::mul(x, x);          // 4
    auto z = ad::add(y, ad::scale(y, 3.0));  // 4y
    ad::backward(ad::sum(z));
    EXPECT_DOUBLE_EQ(x.grad()[0], 16.0);
}

TEST(Backward, NonScalarLossThrows) {
    auto x = leaf({2}, {1.0, 2.0});
    EXPECT_THROW(ad::backward(ad::scale(x, 2.0)), ContractError);
}

TEST(Backward, NoGradientForConstants) {
    auto x = leaf({2}, {1.0, 2.0});
    auto c = Tensor::from({2}, {3.0, 4.0});
    ad::backward(ad::sum(ad::mul(x, c)));
    EXPECT_FALSE(c.has_grad());
    EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
}

TEST(Backward, DetachStopsGradient) {
    auto x = leaf({1}, {3.0});
    auto y = ad::mul(x, x.detach());
    ad::backward(ad::sum(y));
    EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
}

TEST(Backward, OrderVisitsOutputBeforeInputs) {
    auto x = leaf({2}, {1.0, 2.0});
    auto y = ad::tanh(x);
    auto loss = ad::sum(y);
    const auto order = ad::backward_order(loss);
    ASSERT_EQ(order.size(), 3u);
    EXPECT_EQ(order.front(), loss.node().get());
    EXPECT_EQ(order.back(), x.node().get());
}

TEST(Numeric, LogOfNonPositiveThrows) {
    EXPECT_THROW(ad::log(Tensor::from({2}, {1.0, 0.0})), NumericError);
    EXPECT_THROW(ad::log(Tensor::from({1}, {-1.0})), NumericError);
}

TEST(Numeric, NonFiniteForwardThrows) {
    const double big = std::numeric_limits<double>::max();
    auto x = Tensor::from({2}, {big, big});
    EXPECT_THROW(ad::add(x, x), NumericError);
    EXPECT_THROW(ad::scale(Tensor::from({1}, {1.0}), std::numeric_limits<double>::infinity()), NumericError);
}

TEST(Shapes, MismatchThrowsDimensionError) {
    EXPECT_THROW(ad::add(Tensor::zeros({2, 3}), Tensor::zeros({2, 4})), DimensionError);
    EXPECT_THROW(ad::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
    EXPECT_THROW(ad::reshape(Tensor::zeros({2, 3}), {5}), DimensionError);
}

TEST(Shapes, BroadcastOverBatch) {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor::from({2}, {10, 20});
    auto c = ad::add(a, b);
    EXPECT_EQ(c.shape(), (ad::Shape{2, 2}));
    EXPECT_DOUBLE_EQ(c[3], 24.0);
}

TEST(Ops, SoftmaxRowsSumToOneAndAreShiftInvariant) {
    Rng rng(3);
    auto x = Tensor::from({4, 5}, random_values(20, rng, -3, 3));
    auto shifted = ad::add_scalar(x, 100.0);
    auto p = ad::softmax(x), q = ad::softmax(shifted);
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 5; ++c) {
            s += p[r * 5 + c];
            EXPECT_NEAR(p[r * 5 + c], q[r * 5 + c], 1e-12);
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Ops, ConvTransposeIsAdjointOfConv) {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t b = pick_size(rng, 1, 3), cin = pick_size(rng, 1, 3), cout = pick_size(rng, 1, 4);
        const std::size_t k = pick_size(rng, 2, 5), s = pick_size(rng, 1, 3), p = k / 2;
        const std::size_t len = pick_size(rng, 8, 20);
        const std::size_t lout = kernels::conv_output_length(len, k, s, p);
        auto x = Tensor::from({b, cin, len}, random_values(b * cin * len, rng));
        auto w = Tensor::from({cout, cin, k}, random_values(cout * cin * k, rng));
        auto y = Tensor::from({b, cout, lout}, random_values(b * cout * lout, rng));
        const auto cx = ad::conv1d(x, w, Tensor(), s, p);
        const auto ty = ad::conv1d_transpose(y, w, Tensor(), s, p, len);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
        for (std::size_t i = 0; i < ty.size(); ++i) rhs += x[i] * ty[i];
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST(Ops, ClampBoxProjectsAndBlocksGradientOutside) {
    const std::vector<double> lo{-1.0, 0.0}, hi{1.0, 0.5};
    auto x = leaf({2, 2}, {-2.0, 0.25, 0.5, 0.75});
    auto y = ad::clamp_box(x, lo, hi);
    EXPECT_DOUBLE_EQ(y[0], -1.0);
    EXPECT_DOUBLE_EQ(y[1], 0.25);
    EXPECT_DOUBLE_EQ(y[2], 0.5);
    EXPECT_DOUBLE_EQ(y[3], 0.5);
    ad::backward(ad::sum(y));
    EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 1.0);
    EXPECT_DOUBLE_EQ(x.grad()[2], 1.0);
    EXPECT_DOUBLE_EQ(x.grad()[3], 0.0);
}

TEST(Ops, PickRejectsOutOfRangeIndex) {
    const std::vector<std::size_t> idx{0, 3};
    EXPECT_THROW(ad::pick(Tensor::zeros({2, 3}), idx), ContractError);
}
