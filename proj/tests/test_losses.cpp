#include "mgsgan/errors.hpp"
#include "mgsgan/losses.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace mgsgan;
using namespace mgsgan::losses;
using mgsgan::testing::random_values;

namespace {

constexpr double kLn2 = std::numbers::ln2;

std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng, double zero_prob = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) {
        x = u(rng) < zero_prob ? 0.0 : u(rng) + 1e-3;
        s += x;
    }
    if (s == 0.0) {
        v[0] = 1.0;
        s = 1.0;
    }
    for (auto& x : v) x /= s;
    // push the rounding residue into the largest entry so the sum is 1 to ~1 ulp
    const double resid = 1.0 - std::accumulate(v.begin(), v.end(), 0.0);
    *std::max_element(v.begin(), v.end()) += resid;
    return v;
}

DiscreteDistribution dist(std::vector<double> mass) {
    std::vector<double> support(mass.size());
    std::iota(support.begin(), support.end(), 0.0);
    return {support, std::move(mass)};
}

struct Triple {
    DistributionFamily p_r, p_g;
    ClassPriors priors;
};

Triple random_triple(std::mt19937_64& rng) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    Triple t;
    for (std::size_t j = 0; j < n; ++j) {
        t.p_r.push_back(dist(random_simplex(k, rng, 0.2)));
        t.p_g.push_back(dist(random_simplex(k, rng, 0.2)));
    }
    t.priors.p_real = random_simplex(n, rng);
    t.priors.p_gen = random_simplex(n, rng);
    t.priors.p_cls = t.priors.p_real;
    return t;
}

std::vector<std::vector<double>> optimum(const Triple& t) {
    std::vector<std::vector<double>> d;
    for (std::size_t j = 0; j < t.p_r.size(); ++j) d.push_back(optimal_discriminator(t.p_r[j], t.p_g[j], t.priors, j));
    return d;
}

}  // namespace

TEST(Priors, UniformAndEmpirical) {
    const auto u = ClassPriors::uniform(4);
    EXPECT_DOUBLE_EQ(u.p_gen[2], 0.25);
    const std::vector<std::size_t> counts{1, 3};
    const auto e = ClassPriors::empirical(counts);
    EXPECT_DOUBLE_EQ(e.p_real[1], 0.75);
    EXPECT_EQ(e.p_real, e.p_gen);
    EXPECT_EQ(e.p_real, e.p_cls);
    EXPECT_NO_THROW(e.validate());
    ClassPriors bad{{0.5, 0.6}, {0.5, 0.5}, {0.5, 0.5}};
    EXPECT_THROW(bad.validate(), ContractError);
    ClassPriors neg{{1.5, -0.5}, {0.5, 0.5}, {0.5, 0.5}};
    EXPECT_THROW(neg.validate(), ContractError);
}

TEST(LossD, HalfEverywhereSingleClassIsTwoLog2) {
    const auto pri = ClassPriors::uniform(1);
    const std::vector<std::uint32_t> labels(5, 0);
    const auto half = ad::Tensor::full({5}, 0.5);
    EXPECT_NEAR(discriminator_loss(half, labels, half, labels, pri).item(), 2.0 * kLn2, 1e-15);
}

TEST(LossD, HalfEverywhereUniformPriorsIsTwoLog2OverN) {
    for (std::size_t n : {2u, 3u, 7u}) {
        const auto pri = ClassPriors::uniform(n);
        std::vector<std::uint32_t> labels;
        for (std::size_t i = 0; i < 3 * n; ++i) labels.push_back(static_cast<std::uint32_t>(i % n));
        const auto half = ad::Tensor::full({labels.size()}, 0.5);
        EXPECT_NEAR(discriminator_loss(half, labels, half, labels, pri).item(), 2.0 * kLn2 / n, 1e-14);
    }
}

TEST(LossD, PerfectDiscriminatorHitsClampBound) {
    reset_clamp_warning();
    const std::size_t n = 3;
    const auto pri = ClassPriors::uniform(n);
    const std::vector<std::uint32_t> labels{0, 1, 2, 2};
    const auto ones = ad::Tensor::full({4}, 1.0), zeros = ad::Tensor::full({4}, 0.0);
    const double loss = discriminator_loss(ones, labels, zeros, labels, pri).item();
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 2.0 * (1.0 / n) * -std::log(1.0 - kProbEps) + 1e-18);
    EXPECT_TRUE(clamp_warning_emitted());
}

TEST(LossD, UniformPriorsReduceToUnweightedMean) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + trial % 5, b = 3 + trial;
        std::vector<std::uint32_t> lr(b), lf(b);
        for (auto& l : lr) l = static_cast<std::uint32_t>(rng() % n);
        for (auto& l : lf) l = static_cast<std::uint32_t>(rng() % n);
        const auto dr = random_values(b, rng, 0.01, 0.99), df = random_values(b, rng, 0.01, 0.99);
        double unweighted = 0.0;
        for (std::size_t i = 0; i < b; ++i) unweighted -= std::log(dr[i]) / b + std::log(1.0 - df[i]) / b;
        const double l = discriminator_loss(ad::Tensor::from({b}, dr), lr, ad::Tensor::from({b}, df), lf,
                                            ClassPriors::uniform(n))
                             .item();
        EXPECT_NEAR(static_cast<double>(n) * l, unweighted, 1e-10);
    }
}

TEST(LossD, WeightsFollowLabelPriors) {
    ClassPriors pri{{0.2, 0.8}, {0.6, 0.4}, {0.5, 0.5}};
    const std::vector<std::uint32_t> lr{0, 1}, lf{1};
    const double l =
        discriminator_loss(ad::Tensor::from({2}, {0.9, 0.6}), lr, ad::Tensor::from({1}, {0.3}), lf, pri).item();
    const double expected = -(0.2 * std::log(0.9) + 0.8 * std::log(0.6)) / 2.0 - 0.4 * std::log(0.7);
    EXPECT_NEAR(l, expected, 1e-15);
}

TEST(LossD, RejectsBadInputs) {
    const auto pri = ClassPriors::uniform(2);
    const std::vector<std::uint32_t> ok{0, 1}, bad{0, 2}, none;
    const auto d = ad::Tensor::full({2}, 0.5);
    EXPECT_THROW(discriminator_loss(d, bad, d, ok, pri), ContractError);
    EXPECT_THROW(discriminator_loss(ad::Tensor::full({0}, 0.5), none, d, ok, pri), ContractError);
    EXPECT_THROW(discriminator_loss(ad::Tensor::full({3}, 0.5), ok, d, ok, pri), DimensionError);
}

TEST(LossG, HalfSingleClass) {
    const auto pri = ClassPriors::uniform(1);
    const std::vector<std::uint32_t> labels(4, 0);
    const auto half = ad::Tensor::full({4}, 0.5);
    EXPECT_NEAR(generator_loss(half, labels, pri).item(), kLn2, 1e-15);
    EXPECT_NEAR(generator_loss(half, labels, pri, GeneratorLoss::Saturating).item(), -kLn2, 1e-15);
}

TEST(LossG, SaturatingAndNonSaturatingAgreeInSign) {
    // fake x = theta, D(x) = sigmoid(a x + b) fixed.
    // non-saturating: dL/dtheta = -a (1 - s); saturating: dL/dtheta = -a s.
    const auto pri = ClassPriors::uniform(1);
    const std::vector<std::uint32_t> label{0};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = u(rng), b = u(rng), theta0 = u(rng);
        const double s = 1.0 / (1.0 + std::exp(-(a * theta0 + b)));
        double grads[2];
        for (int k = 0; k < 2; ++k) {
            auto theta = ad::Tensor::from({1}, {theta0}, true);
            const auto d = ad::sigmoid(ad::add_scalar(ad::scale(theta, a), b));
            ad::backward(generator_loss(d, label, pri, k == 0 ? GeneratorLoss::NonSaturating : GeneratorLoss::Saturating));
            grads[k] = theta.grad()[0];
        }
        EXPECT_NEAR(grads[0], -a * (1.0 - s), 1e-12);
        EXPECT_NEAR(grads[1], -a * s, 1e-12);
        EXPECT_EQ(std::signbit(grads[0]), std::signbit(grads[1]));
    }
}

TEST(LossC, UniformClassifierGivesLogN) {
    const std::size_t n = 5;
    const auto pri = ClassPriors::uniform(n);
    const std::vector<std::uint32_t> labels{0, 3, 4};
    const auto c = ad::Tensor::full({3, n}, 1.0 / n);
    EXPECT_NEAR(classifier_loss(c, labels, ad::Tensor(), {}, pri).item(), std::log(5.0) / n, 1e-14);
}

TEST(LossC, PerfectClassifierBound) {
    const auto pri = ClassPriors::uniform(2);
    const std::vector<std::uint32_t> labels{0, 1};
    const auto c = ad::Tensor::from({2, 2}, {1, 0, 0, 1});
    EXPECT_LE(classifier_loss(c, labels, c, labels, pri).item(), -2.0 * std::log(1.0 - kProbEps));
}

TEST(LossC, WithoutFakesEqualsWeightedCrossEntropy) {
    std::mt19937_64 rng(8);
    ClassPriors pri{{0.1, 0.3, 0.6}, {0.1, 0.3, 0.6}, {0.1, 0.3, 0.6}};
    const std::size_t b = 6;
    std::vector<double> probs;
    for (std::size_t i = 0; i < b; ++i) {
        const auto row = random_simplex(3, rng);
        probs.insert(probs.end(), row.begin(), row.end());
    }
    const std::vector<std::uint32_t> labels{0, 1, 2, 2, 1, 0};
    double expected = 0.0;
    for (std::size_t i = 0; i < b; ++i) expected -= pri.p_cls[labels[i]] * std::log(probs[i * 3 + labels[i]]) / b;
    EXPECT_NEAR(classifier_loss(ad::Tensor::from({b, 3}, probs), labels, ad::Tensor(), {}, pri).item(), expected,
                1e-10);

    // fakes add their own weighted mean
    const std::vector<std::uint32_t> fl{2};
    const auto cf = ad::Tensor::from({1, 3}, {0.2, 0.3, 0.5});
    EXPECT_NEAR(classifier_loss(ad::Tensor::from({b, 3}, probs), labels, cf, fl, pri).item(),
                expected - 0.6 * std::log(0.5), 1e-10);
}

TEST(LossAchsgan, FakesTargetLastColumn) {
    const auto pri = ClassPriors::uniform(2);
    const std::vector<std::uint32_t> lr{1}, lf{0};
    const auto pr = ad::Tensor::from({1, 3}, {0.1, 0.7, 0.2});
    const auto pf = ad::Tensor::from({1, 3}, {0.3, 0.3, 0.4});
    EXPECT_NEAR(achsgan_discriminator_loss(pr, lr, pf, lf, pri).item(), -0.5 * std::log(0.7) - 0.5 * std::log(0.4),
                1e-15);
    EXPECT_NEAR(achsgan_generator_loss(pf, lf, pri).item(), -0.5 * std::log(0.3), 1e-15);
    EXPECT_NEAR(achsgan_generator_loss(pf, lf, pri, GeneratorLoss::Saturating).item(), 0.5 * std::log(0.4), 1e-15);
    EXPECT_THROW(achsgan_generator_loss(ad::Tensor::full({1, 2}, 0.5), lf, pri), DimensionError);
}

TEST(GradientIsolation, GeneratorLossLeavesDiscriminatorUntouched) {
    nn::Rng rng(3);
    models::ArchConfig arch;
    arch.noise_dim = 4;
    arch.gen_channels_first = 3;
    arch.gen_channels_second = 2;
    arch.disc_channels_first = 2;
    arch.disc_channels_second = 3;
    arch.cls_kernels = {3};
    arch.cls_channels_first = 2;
    arch.cls_channels_second = 2;
    auto m = models::build_models(models::GameMode::Acsgan, 2, 16, arch, {}, rng);
    const auto pri = ClassPriors::uniform(2);
    const std::vector<std::uint32_t> labels{0, 0, 1, 1};
    const auto z = ad::Tensor::from({4, 4}, random_values(16, rng));
    const auto real = ad::Tensor::from({4, 16}, random_values(64, rng));

    // G step: D frozen
    m.discriminator.set_trainable(false);
    m.generators.set_trainable(true);
    ad::backward(loss_G(m.discriminator, {m.generators.generate_batch(z, labels), labels}, pri));
    for (const auto& p : m.discriminator.parameters()) EXPECT_FALSE(p.has_grad());
    bool any = false;
    for (const auto& p : m.generators.parameters()) any = any || p.has_grad();
    EXPECT_TRUE(any);

    // D step: fakes detached, G frozen
    for (auto p : m.generators.parameters()) p.clear_grad();
    m.discriminator.set_trainable(true);
    m.generators.set_trainable(false);
    const auto fake = m.generators.generate_batch(z, labels).detach();
    ad::backward(loss_D(m.discriminator, {real, labels}, {fake, labels}, pri));
    for (const auto& p : m.generators.parameters()) EXPECT_FALSE(p.has_grad());
    for (const auto& p : m.discriminator.parameters()) EXPECT_TRUE(p.has_grad());
}

TEST(OptimalD, Examples) {
    const auto pri = ClassPriors::uniform(1);
    const auto d = optimal_discriminator(dist({0.7, 0.3}), dist({0.2, 0.8}), pri, 0);
    EXPECT_NEAR(d[0], 0.7 / 0.9, 1e-15);
    EXPECT_NEAR(d[1], 0.3 / 1.1, 1e-15);

    const auto same = optimal_discriminator(dist({0.1, 0.5, 0.4}), dist({0.1, 0.5, 0.4}), pri, 0);
    for (double v : same) EXPECT_DOUBLE_EQ(v, 0.5);

    const auto disjoint = optimal_discriminator(dist({1.0, 0.0, 0.0}), dist({0.0, 1.0, 0.0}), pri, 0);
    EXPECT_DOUBLE_EQ(disjoint[0], 1.0);
    EXPECT_DOUBLE_EQ(disjoint[1], 0.0);
    EXPECT_DOUBLE_EQ(disjoint[2], 0.5);

    DiscreteDistribution other{{0.0, 2.0}, {0.5, 0.5}};
    EXPECT_THROW(optimal_discriminator(dist({0.5, 0.5}), other, pri, 0), ContractError);
    EXPECT_THROW(optimal_discriminator(dist({0.5, 0.6}), dist({0.5, 0.5}), pri, 0), ContractError);
}

TEST(GameValue, OptimumExamples) {
    const auto pri = ClassPriors::uniform(1);
    EXPECT_NEAR(game_value_at_optimum({dist({0.3, 0.7})}, {dist({0.3, 0.7})}, pri), -2.0 * kLn2, 1e-12);
    EXPECT_NEAR(game_value_at_optimum({dist({1.0, 0.0})}, {dist({0.0, 1.0})}, pri), 0.0, 1e-12);
}

TEST(GameValue, DualRouteAgrees) {
    const auto pri = ClassPriors::uniform(1);
    const DistributionFamily pr{dist({0.7, 0.3})}, pg{dist({0.2, 0.8})};
    const auto d = optimal_discriminator(pr[0], pg[0], pri, 0);
    EXPECT_NEAR(game_value(pr, pg, pri, {d}), game_value_at_optimum(pr, pg, pri), 1e-12);
    // route (a) by hand: JS of [0.7,0.3] vs [0.2,0.8]
    const double m0 = 0.45, m1 = 0.55;
    const double js = 0.5 * (0.7 * std::log(0.7 / m0) + 0.3 * std::log(0.3 / m1)) +
                      0.5 * (0.2 * std::log(0.2 / m0) + 0.8 * std::log(0.8 / m1));
    EXPECT_NEAR(game_value_at_optimum(pr, pg, pri), -2.0 * kLn2 + 2.0 * js, 1e-12);
}

TEST(GameValue, OptimalDiscriminatorIsPointwiseMaximum) {
    std::mt19937_64 rng(2025);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_triple(rng);
        const auto d = optimum(t);
        const double v_star = game_value(t.p_r, t.p_g, t.priors, d);
        for (std::size_t j = 0; j < d.size(); ++j) {
            for (std::size_t i = 0; i < d[j].size(); ++i) {
                for (double delta : {-1e-3, 1e-3}) {
                    auto dp = d;
                    dp[j][i] = std::clamp(dp[j][i] + delta, 0.0, 1.0);
                    EXPECT_LE(game_value(t.p_r, t.p_g, t.priors, dp), v_star + 1e-15)
                        << "trial " << trial << " class " << j << " point " << i;
                }
            }
        }
    }
}

TEST(GameValue, ValueAtOptimumMatchesJensenShannonForm) {
    std::mt19937_64 rng(2025);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_triple(rng);
        EXPECT_NEAR(game_value(t.p_r, t.p_g, t.priors, optimum(t)), game_value_at_optimum(t.p_r, t.p_g, t.priors),
                    1e-12);
        // identical real and generated measures give -2 log 2
        EXPECT_NEAR(game_value_at_optimum(t.p_r, t.p_r, ClassPriors{t.priors.p_real, t.priors.p_real, t.priors.p_real}),
                    -2.0 * kLn2, 1e-12);
    }
}

TEST(JensenShannon, BoundsAndSymmetry) {
    const std::vector<double> p{0.1, 0.9}, q{0.6, 0.4}, r{1.0, 0.0}, s{0.0, 1.0};
    EXPECT_NEAR(jensen_shannon(p, q), jensen_shannon(q, p), 1e-15);
    EXPECT_DOUBLE_EQ(jensen_shannon(p, p), 0.0);
    EXPECT_NEAR(jensen_shannon(r, s), kLn2, 1e-15);
}
