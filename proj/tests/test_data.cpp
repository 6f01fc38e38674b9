#include "mgsgan/data.hpp"
#include "mgsgan/errors.hpp"
#include "mgsgan/losses.hpp"
#include "mgsgan/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace mgsgan;
using namespace mgsgan::data;

namespace {

SpectralDataset labeled(std::vector<std::size_t> sizes, std::size_t bands = 2) {
    SpectralDataset ds;
    ds.bands = bands;
    ds.classes = sizes.size();
    double v = 0.0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            for (std::size_t b = 0; b < bands; ++b) ds.samples.push_back(v += 0.5);
            ds.labels.push_back(static_cast<std::uint32_t>(c));
        }
    }
    return ds;
}

std::size_t parse_error_line(const std::string& text) {
    try {
        parse_csv(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

std::filesystem::path temp_path(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST(Csv, ParsesSmallFile) {
    const auto ds = parse_csv("d=2,N=2\n0.5,1.5,0\n-1,2e-3,1\n3,4,1\n");
    EXPECT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.bands, 2u);
    EXPECT_EQ(ds.classes, 2u);
    EXPECT_DOUBLE_EQ(ds.samples[3], 2e-3);
    EXPECT_EQ(ds.labels, (std::vector<std::uint32_t>{0, 1, 1}));
}

TEST(Csv, ToleratesBlankLinesAndCrlf) {
    const auto ds = parse_csv("d=1,N=1\r\n\r\n 7 , 0\r\n");
    EXPECT_EQ(ds.size(), 1u);
    EXPECT_DOUBLE_EQ(ds.samples[0], 7.0);
}

TEST(Csv, ShortRowReportsItsLine) {
    EXPECT_EQ(parse_error_line("d=3,N=2\n1,2,3,0\n1,2,1\n"), 3u);
    EXPECT_EQ(parse_error_line("d=2,N=2\n1,x,0\n"), 2u);
    EXPECT_EQ(parse_error_line("d=2,N=2\n1,2,0.5\n"), 2u);
    EXPECT_EQ(parse_error_line("dims=2,N=2\n"), 1u);
    EXPECT_THROW(parse_csv(""), ParseError);
}

TEST(Csv, LabelOutOfRangeIsDataError) {
    try {
        parse_csv("d=1,N=2\n1,0\n2,1\n3,2\n");
        FAIL() << "expected DataError";
    } catch (const ParseError&) {
        FAIL() << "label errors are data errors, not parse errors";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
    }
}

TEST(Csv, MissingClassIsDataError) { EXPECT_THROW(parse_csv("d=1,N=3\n1,0\n2,1\n"), DataError); }

TEST(Csv, FormatRoundTripsExactly) {
    SyntheticSpec s;
    s.seed = 3;
    s.classes = 3;
    s.bands = 7;
    s.sizes = {4, 5, 6};
    const auto ds = make_synthetic(s);
    const auto back = parse_csv(format_csv(ds));
    EXPECT_EQ(back.samples, ds.samples);
    EXPECT_EQ(back.labels, ds.labels);
}

TEST(Bin, RoundTripIsBitIdentical) {
    SyntheticSpec s;
    s.seed = 4;
    s.classes = 2;
    s.bands = 9;
    s.sizes = {5, 3};
    auto ds = make_synthetic(s);
    ds = normalize(ds, Normalization::fit(ds.samples, ds.bands));
    const auto bytes = encode_bin(ds);
    const auto back = decode_bin(bytes);
    EXPECT_EQ(encode_bin(back), bytes);
    ASSERT_EQ(back.samples.size(), ds.samples.size());
    EXPECT_EQ(std::memcmp(back.samples.data(), ds.samples.data(), ds.samples.size() * sizeof(double)), 0);
    ASSERT_TRUE(back.normalization.has_value());
    EXPECT_EQ(back.normalization->min, ds.normalization->min);

    const auto path = temp_path("mgsgan_test_roundtrip.bin");
    save_dataset(ds, path);
    const auto loaded = load_dataset(path);
    std::filesystem::remove(path);
    EXPECT_EQ(encode_bin(loaded), bytes);
}

TEST(Bin, CorruptInputsThrow) {
    const auto bytes = encode_bin(labeled({2, 2}));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_bin(bad), ParseError);
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 3);
    EXPECT_THROW(decode_bin(cut), ParseError);
}

TEST(Files, FormatDetectionAndMissingFile) {
    EXPECT_EQ(format_from_path("a/b.csv"), Format::Csv);
    EXPECT_EQ(format_from_path("b.bin"), Format::Bin);
    EXPECT_EQ(parse_format("csv"), Format::Csv);
    EXPECT_THROW(parse_format("xml"), ContractError);
    EXPECT_THROW(load_dataset(temp_path("mgsgan_definitely_missing.csv")), DataError);
}

TEST(Split, TrainCountExamples) {
    EXPECT_EQ(train_count(0.1, 200), 20u);
    EXPECT_EQ(train_count(0.05, 20), 1u);
    EXPECT_EQ(train_count(0.01, 30), 1u);
    EXPECT_EQ(train_count(0.99, 10), 9u);
}

TEST(Split, ExampleSizes) {
    const auto ds = labeled({200, 20});
    const auto [train, test] = split_tttr(ds, {0.1, 7, true});
    EXPECT_EQ(train.class_counts(), (std::vector<std::size_t>{20, 2}));
    EXPECT_EQ(test.class_counts(), (std::vector<std::size_t>{180, 18}));
    const auto [train5, test5] = split_tttr(labeled({20}), {0.05, 7, true});
    EXPECT_EQ(train5.size(), 1u);
    EXPECT_EQ(test5.size(), 19u);
}

TEST(Split, DisjointExhaustiveAndDeterministic) {
    // every sample is unique, so compare by first band value
    const auto ds = labeled({37, 5, 120, 2}, 1);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto [train, test] = split_tttr(ds, {0.3, seed, true});
        std::multiset<double> all(train.samples.begin(), train.samples.end());
        all.insert(test.samples.begin(), test.samples.end());
        EXPECT_EQ(all, std::multiset<double>(ds.samples.begin(), ds.samples.end()));
        std::set<double> tr(train.samples.begin(), train.samples.end());
        for (double v : test.samples) EXPECT_EQ(tr.count(v), 0u);
        // per-class proportion within one sample of the target
        const auto counts = ds.class_counts(), tc = train.class_counts();
        for (std::size_t c = 0; c < counts.size(); ++c) {
            EXPECT_LE(std::abs(static_cast<double>(tc[c]) - 0.3 * static_cast<double>(counts[c])), 1.0);
            EXPECT_GE(tc[c], 1u);
        }
        const auto [again, _] = split_tttr(ds, {0.3, seed, true});
        EXPECT_EQ(again.samples, train.samples);
    }
    const auto [a, _a] = split_tttr(ds, {0.3, 1, true});
    const auto [b, _b] = split_tttr(ds, {0.3, 2, true});
    EXPECT_NE(a.samples, b.samples);
    EXPECT_THROW(split_tttr(ds, {1.0, 1, true}), ContractError);
}

TEST(Priors, FromTrainingSplit) {
    EXPECT_EQ(losses::class_priors(labeled({4, 4})).p_real, (std::vector<double>{0.5, 0.5}));
    const auto p = losses::class_priors(labeled({90, 10}));
    EXPECT_DOUBLE_EQ(p.p_real[0], 0.9);
    EXPECT_DOUBLE_EQ(p.p_real[1], 0.1);
    EXPECT_EQ(p.p_gen, p.p_real);
    EXPECT_EQ(losses::class_priors(labeled({90, 10}), losses::PriorMode::Uniform).p_real[1], 0.5);

    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::size_t> sizes(1 + rng() % 9);
        for (auto& s : sizes) s = 1 + rng() % 1000;
        const auto pr = losses::class_priors(labeled(sizes, 1));
        EXPECT_NEAR(std::accumulate(pr.p_real.begin(), pr.p_real.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(Normalization, MapsTrainingRangeToUnitIntervalAndInverts) {
    SyntheticSpec s;
    s.seed = 9;
    s.classes = 3;
    s.bands = 16;
    s.sizes = {30, 20, 10};
    const auto ds = make_synthetic(s);
    const auto norm = Normalization::fit(ds.samples, ds.bands);
    const auto n = normalize(ds, norm);
    for (double v : n.samples) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
    const auto back = denormalize(n);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) EXPECT_NEAR(back.samples[i], ds.samples[i], 1e-6);
    EXPECT_FALSE(back.normalization.has_value());
    EXPECT_THROW(denormalize(ds), ContractError);
}

TEST(Normalization, ConstantBandMapsToZero) {
    const auto norm = Normalization::fit(std::vector<double>{2.0, 2.0, 2.0}, 1);
    EXPECT_EQ(norm.apply(0, 2.0), 0.0);
    EXPECT_EQ(norm.invert(0, 0.0), 2.0);
}

TEST(Synthetic, SameSeedIsBitIdentical) {
    SyntheticSpec s;
    s.seed = 42;
    s.sizes = {10, 20, 30, 5};
    EXPECT_EQ(encode_bin(make_synthetic(s)), encode_bin(make_synthetic(s)));
    auto t = s;
    t.seed = 43;
    EXPECT_NE(make_synthetic(s).samples, make_synthetic(t).samples);
}

TEST(Synthetic, ImbalanceFollowsSizes) {
    SyntheticSpec s;
    s.classes = 2;
    s.sizes = {1000, 20};
    const auto counts = make_synthetic(s).class_counts();
    EXPECT_EQ(counts[0] / counts[1], 50u);
}

TEST(Synthetic, ClassMeansSeparatedByFiveNoiseSigmas) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SyntheticSpec s;
        s.seed = seed;
        s.classes = 5;
        s.bands = 64;
        s.noise = 0.02;
        s.sizes = {200, 200, 200, 200, 200};
        const auto ds = make_synthetic(s);
        std::vector<std::vector<double>> mean(5, std::vector<double>(64, 0.0));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (std::size_t b = 0; b < 64; ++b) mean[ds.labels[i]][b] += ds.row(i)[b] / 200.0;
        }
        for (std::size_t a = 0; a < 5; ++a) {
            for (std::size_t c = a + 1; c < 5; ++c) {
                double d2 = 0.0;
                for (std::size_t b = 0; b < 64; ++b) d2 += (mean[a][b] - mean[c][b]) * (mean[a][b] - mean[c][b]);
                EXPECT_GE(std::sqrt(d2), 5.0 * s.noise) << "seed " << seed << " classes " << a << "," << c;
            }
        }
    }
}

TEST(Synthetic, OverlapPullsMinorityTowardMajority) {
    SyntheticSpec s;
    s.seed = 1;
    s.classes = 3;
    s.bands = 32;
    s.sizes = {50, 80, 5};
    const auto t0 = synthetic_templates(s);
    s.overlap = 1.0;
    const auto t1 = synthetic_templates(s);
    for (std::size_t b = 0; b < 32; ++b) {
        EXPECT_DOUBLE_EQ(t1[2 * 32 + b], t1[1 * 32 + b]);
        EXPECT_EQ(t1[b], t0[b]);
    }
}

TEST(Synthetic, RejectsBadSpecs) {
    SyntheticSpec s;
    s.sizes = {10, 10, 10};
    EXPECT_THROW(make_synthetic(s), ContractError);
    s.sizes = {10, 10, 1, 10};
    EXPECT_THROW(make_synthetic(s), ContractError);
    s.sizes = {10, 10, 10, 10};
    s.overlap = 1.5;
    EXPECT_THROW(make_synthetic(s), ContractError);
}

// Box edges converge at rate 1/n, so this needs a few hundred training samples per class.
TEST(Synthetic, HeldOutSamplesStayInsideTrainingBoxes) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticSpec s;
        s.seed = seed;
        s.sizes = {1000, 1000, 1000, 1000};
        const auto ds = make_synthetic(s);
        const auto [train, test] = split_tttr(ds, {0.5, seed, true});
        const auto boxes = models::compute_class_domains(train, 0.05);
        std::size_t inside = 0;
        for (std::size_t i = 0; i < test.size(); ++i) inside += boxes[test.labels[i]].contains(test.row(i));
        EXPECT_GE(static_cast<double>(inside) / static_cast<double>(test.size()), 0.99) << "seed " << seed;
    }
}

TEST(Fnv1a, KnownVectors) {
    EXPECT_EQ(fnv1a({}), 0xcbf29ce484222325ULL);
    const std::string a = "a";
    EXPECT_EQ(fnv1a({reinterpret_cast<const std::uint8_t*>(a.data()), a.size()}), 0xaf63dc4c8601ec8cULL);
}

TEST(Dataset, ValidateCatchesShapeErrors) {
    auto ds = labeled({2, 2});
    ds.samples.pop_back();
    EXPECT_THROW(ds.validate(), DataError);
    ds = labeled({2, 2});
    ds.samples[0] = std::nan("");
    EXPECT_THROW(ds.validate(), DataError);
}
