#include "mgsgan/errors.hpp"
#include "mgsgan/models.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace mgsgan;
using namespace mgsgan::models;
using mgsgan::testing::random_values;

namespace {

ArchConfig small_arch() {
    ArchConfig a;
    a.noise_dim = 6;
    a.gen_channels_first = 4;
    a.gen_channels_second = 3;
    a.disc_channels_first = 3;
    a.disc_channels_second = 4;
    a.cls_kernels = {3, 5};
    a.cls_channels_first = 2;
    a.cls_channels_second = 3;
    return a;
}

data::SpectralDataset toy_dataset(std::size_t classes, std::size_t bands, std::uint64_t seed) {
    data::SyntheticSpec s;
    s.seed = seed;
    s.classes = classes;
    s.bands = bands;
    s.sizes.assign(classes, 12);
    auto ds = data::make_synthetic(s);
    return data::normalize(ds, data::Normalization::fit(ds.samples, ds.bands));
}

Tensor noise(std::size_t rows, std::size_t dim, nn::Rng& rng, double scale = 3.0) {
    return Tensor::from({rows, dim}, random_values(rows * dim, rng, -scale, scale));
}

}  // namespace

TEST(Domains, BoxesCoverClassSamplesWithMargin) {
    const auto ds = toy_dataset(3, 16, 1);
    const auto boxes = compute_class_domains(ds, 0.05);
    ASSERT_EQ(boxes.size(), 3u);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_TRUE(boxes[ds.labels[i]].contains(ds.row(i)));
    const auto tight = compute_class_domains(ds, 0.0);
    for (std::size_t b = 0; b < 16; ++b) {
        const double w = tight[0].upper[b] - tight[0].lower[b];
        EXPECT_NEAR(boxes[0].lower[b], tight[0].lower[b] - 0.05 * w, 1e-12);
        EXPECT_NEAR(boxes[0].upper[b], tight[0].upper[b] + 0.05 * w, 1e-12);
    }
}

TEST(Domains, MissingClassThrowsDataError) {
    auto ds = toy_dataset(3, 16, 1);
    ds.classes = 4;
    try {
        compute_class_domains(ds, 0.05);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("class 3"), std::string::npos);
    }
}

TEST(GameModes, NamesRoundTrip) {
    for (auto m : {GameMode::Mgsgan, GameMode::Acsgan, GameMode::Achsgan}) {
        EXPECT_EQ(parse_game_mode(to_string(m)), m);
    }
    EXPECT_THROW(parse_game_mode("wgan"), ContractError);
}

TEST(Generator, MixtureOutputsAlwaysInsideClassBox) {
    const auto ds = toy_dataset(3, 20, 2);
    const auto boxes = compute_class_domains(ds, 0.05);
    nn::Rng rng(5);
    GeneratorBank bank(3, 20, small_arch(), true, boxes, rng);
    for (std::uint32_t c = 0; c < 3; ++c) {
        // large noise pushes raw outputs toward +-1, well outside most boxes
        const auto x = bank.generate(noise(64, 6, rng, 50.0), c, Mode::Eval);
        for (std::size_t i = 0; i < 64; ++i) {
            EXPECT_TRUE(boxes[c].contains(x.values().subspan(i * 20, 20))) << "class " << c << " row " << i;
        }
    }
}

TEST(Generator, SingleModeIsNotProjected) {
    const auto ds = toy_dataset(2, 20, 2);
    nn::Rng rng(5);
    GeneratorBank bank(2, 20, small_arch(), false, {}, rng);
    EXPECT_EQ(bank.networks().size(), 1u);
    const auto z = noise(8, 6, rng);
    const auto a = bank.generate(z, 1), b = bank.raw(z, 1);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Generator, BatchRowsMatchPerClassCalls) {
    const auto ds = toy_dataset(3, 20, 4);
    nn::Rng rng(6);
    GeneratorBank bank(3, 20, small_arch(), true, compute_class_domains(ds, 0.05), rng);
    const std::vector<std::uint32_t> labels{0, 0, 1, 2, 2, 2};
    const auto z = noise(6, 6, rng);
    const auto all = bank.generate_batch(z, labels, Mode::Eval);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto one = bank.generate(ad::slice_rows(z, i, i + 1), labels[i], Mode::Eval);
        for (std::size_t b = 0; b < 20; ++b) EXPECT_NEAR(all[i * 20 + b], one[b], 1e-12);
    }
    const std::vector<std::uint32_t> mixed{1, 0, 1, 2, 0, 2};
    const auto m = bank.generate_batch(z, mixed, Mode::Eval);
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        const auto one = bank.generate(ad::slice_rows(z, i, i + 1), mixed[i], Mode::Eval);
        for (std::size_t b = 0; b < 20; ++b) EXPECT_NEAR(m[i * 20 + b], one[b], 1e-12);
    }
}

TEST(Generator, RejectsUnknownClassAndBadNoise) {
    nn::Rng rng(7);
    GeneratorBank bank(2, 20, small_arch(), false, {}, rng);
    EXPECT_THROW(bank.generate(noise(2, 6, rng), 2), ContractError);
    EXPECT_THROW(bank.generate(noise(2, 5, rng), 0), DimensionError);
}

TEST(Generator, GradientMatchesFiniteDifferences) {
    const auto ds = toy_dataset(2, 16, 8);
    nn::Rng rng(8);
    // generous margin keeps most outputs strictly inside the box
    GeneratorBank bank(2, 16, small_arch(), true, compute_class_domains(ds, 2.0), rng);
    // zero biases put ReLU inputs exactly on the kink; move them off it
    for (auto p : bank.parameters()) {
        if (p.rank() == 1) {
            const auto v = random_values(p.size(), rng, -0.2, 0.2);
            std::copy(v.begin(), v.end(), p.mutable_values().begin());
        }
    }
    const auto z = noise(3, 6, rng, 1.0);
    mgsgan::testing::GradCase c{bank.parameters(), [&] { return bank.generate(z, 1, Mode::Train); }};
    // only generator 1's parameters influence the output
    const auto rep = mgsgan::testing::check_gradients(c, rng);
    EXPECT_LT(rep.max_rel_error, 1e-3);
}

TEST(Discriminator, SingleOutputIsProbabilityPerRow) {
    nn::Rng rng(9);
    Discriminator d(24, 1, small_arch(), rng);
    const auto y = d.forward(noise(5, 24, rng, 1.0));
    ASSERT_EQ(y.shape(), (ad::Shape{5}));
    for (double v : y.values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Discriminator, ZeroWeightsGiveOneHalf) {
    nn::Rng rng(9);
    Discriminator d(24, 1, small_arch(), rng);
    for (auto p : d.parameters()) std::fill(p.mutable_values().begin(), p.mutable_values().end(), 0.0);
    const auto y = d.forward(noise(4, 24, rng));
    for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Discriminator, MultiOutputRowsSumToOne) {
    nn::Rng rng(10);
    Discriminator d(24, 5, small_arch(), rng);
    const auto y = d.forward(noise(3, 24, rng, 1.0));
    ASSERT_EQ(y.shape(), (ad::Shape{3, 5}));
    for (std::size_t r = 0; r < 3; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < 5; ++k) s += y[r * 5 + k];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Classifier, ProbabilitiesSumToOneAndZeroLogitsAreUniform) {
    nn::Rng rng(11);
    Classifier c(24, 4, small_arch(), rng);
    const auto p = c.forward(noise(6, 24, rng, 1.0));
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += p[r * 4 + k];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (auto t : c.head().parameters()) std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
    const auto u = c.forward(noise(3, 24, rng), Mode::Eval);
    for (double v : u.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Classifier, ArgmaxInvariantToLogitShift) {
    nn::Rng rng(12);
    Classifier c(24, 4, small_arch(), rng);
    const auto x = noise(8, 24, rng, 1.0);
    const auto p1 = c.forward(x, Mode::Eval);
    auto bias = c.head().parameters().back();
    for (double& b : bias.mutable_values()) b += 7.5;
    const auto p2 = c.forward(x, Mode::Eval);
    for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_NEAR(p1[i], p2[i], 1e-12);
}

TEST(Classifier, KernelSetChangesParametersNotOutputShape) {
    nn::Rng rng(13);
    auto a = small_arch();
    Classifier c1(32, 3, a, rng);
    a.cls_kernels = {3, 5, 7, 9};
    Classifier c2(32, 3, a, rng);
    auto count = [](const Classifier& c) {
        std::size_t n = 0;
        for (const auto& p : c.parameters()) n += p.size();
        return n;
    };
    EXPECT_NE(count(c1), count(c2));
    EXPECT_EQ(c2.branches().size(), 4u);
    const auto x = noise(2, 32, rng, 1.0);
    EXPECT_EQ(c1.forward(x).shape(), c2.forward(x).shape());
}

TEST(BuildModels, PlayersPerMode) {
    const auto ds = toy_dataset(3, 24, 3);
    const auto boxes = compute_class_domains(ds, 0.05);
    nn::Rng rng(14);
    const auto mg = build_models(GameMode::Mgsgan, 3, 24, small_arch(), boxes, rng);
    EXPECT_EQ(mg.generators.networks().size(), 3u);
    EXPECT_TRUE(mg.generators.mixture());
    EXPECT_EQ(mg.discriminator.outputs(), 1u);
    EXPECT_TRUE(mg.classifier.has_value());

    const auto ac = build_models(GameMode::Acsgan, 3, 24, small_arch(), boxes, rng);
    EXPECT_EQ(ac.generators.networks().size(), 1u);
    EXPECT_FALSE(ac.generators.mixture());
    EXPECT_TRUE(ac.classifier.has_value());

    const auto ah = build_models(GameMode::Achsgan, 3, 24, small_arch(), boxes, rng);
    EXPECT_EQ(ah.discriminator.outputs(), 4u);
    EXPECT_FALSE(ah.classifier.has_value());
    const auto p = ah.class_probabilities(noise(2, 24, rng, 1.0));
    ASSERT_EQ(p.shape(), (ad::Shape{2, 3}));
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(BuildModels, PredictReturnsOneLabelPerSample) {
    const auto ds = toy_dataset(3, 24, 3);
    nn::Rng rng(15);
    const auto m = build_models(GameMode::Mgsgan, 3, 24, small_arch(), compute_class_domains(ds, 0.05), rng);
    const auto pred = m.predict(ds);
    ASSERT_EQ(pred.size(), ds.size());
    for (auto p : pred) EXPECT_LT(p, 3u);
    auto wrong = toy_dataset(3, 20, 3);
    EXPECT_THROW(m.predict(wrong), DataError);
}

TEST(OneHot, RowsAndRange) {
    const std::vector<std::uint32_t> labels{2, 0};
    const auto t = one_hot(labels, 3);
    const std::vector<double> expected{0, 0, 1, 1, 0, 0};
    EXPECT_TRUE(std::equal(expected.begin(), expected.end(), t.values().begin()));
    const std::vector<std::uint32_t> bad{3};
    EXPECT_THROW(one_hot(bad, 3), ContractError);
}

class CheckpointRoundTrip : public ::testing::TestWithParam<GameMode> {};

TEST_P(CheckpointRoundTrip, ReencodesBitIdentically) {
    const auto ds = toy_dataset(3, 24, 21);
    nn::Rng rng(16);
    const auto m = build_models(GetParam(), 3, 24, small_arch(), compute_class_domains(ds, 0.05), rng);
    const auto bytes = encode_checkpoint(m);
    const auto loaded = decode_checkpoint(bytes);
    EXPECT_EQ(encode_checkpoint(loaded), bytes);
    EXPECT_EQ(loaded.mode, GetParam());
    EXPECT_EQ(loaded.classes, 3u);
    EXPECT_EQ(loaded.bands, 24u);
    EXPECT_EQ(loaded.noise_dim, 6u);

    // loaded boxes contain the original ones
    ASSERT_EQ(loaded.generators.domains().size(), m.generators.domains().size());
    for (std::size_t c = 0; c < m.generators.domains().size(); ++c) {
        for (std::size_t b = 0; b < 24; ++b) {
            EXPECT_LE(loaded.generators.domains()[c].lower[b], m.generators.domains()[c].lower[b]);
            EXPECT_GE(loaded.generators.domains()[c].upper[b], m.generators.domains()[c].upper[b]);
        }
    }
    // predictions of a decoded model are stable across a second round trip
    const auto again = decode_checkpoint(encode_checkpoint(loaded));
    EXPECT_EQ(loaded.predict(ds), again.predict(ds));
}

INSTANTIATE_TEST_SUITE_P(Modes, CheckpointRoundTrip,
                         ::testing::Values(GameMode::Mgsgan, GameMode::Acsgan, GameMode::Achsgan),
                         [](const auto& info) { return to_string(info.param); });

TEST(Checkpoint, FileRoundTrip) {
    const auto ds = toy_dataset(2, 24, 22);
    nn::Rng rng(17);
    const auto m = build_models(GameMode::Mgsgan, 2, 24, small_arch(), compute_class_domains(ds, 0.05), rng);
    const auto path = std::filesystem::temp_directory_path() / "mgsgan_test_roundtrip.ckpt";
    save_checkpoint(m, path);
    const auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);
    EXPECT_EQ(encode_checkpoint(loaded), encode_checkpoint(m));
    EXPECT_THROW(load_checkpoint(path), DataError);
}

TEST(Checkpoint, CorruptInputsThrow) {
    const auto ds = toy_dataset(2, 24, 23);
    nn::Rng rng(18);
    const auto m = build_models(GameMode::Acsgan, 2, 24, small_arch(), compute_class_domains(ds, 0.05), rng);
    const auto good = encode_checkpoint(m);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad_magic), DataError);

    auto bad_version = good;
    bad_version[4] = 9;
    EXPECT_THROW(decode_checkpoint(bad_version), DataError);

    auto bad_mode = good;
    bad_mode[20] = 7;
    EXPECT_THROW(decode_checkpoint(bad_mode), DataError);

    for (std::size_t cut : {3ul, 20ul, good.size() / 2, good.size() - 1}) {
        const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + static_cast<long>(cut));
        EXPECT_THROW(decode_checkpoint(truncated), ParseError) << "cut at " << cut;
    }
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_checkpoint(trailing), DataError);
}
