#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mgsgan::data {

/// Per-band affine map of [min, max] onto [-1, 1], fitted on a training split.
struct Normalization {
    std::vector<double> min;
    std::vector<double> max;

    static Normalization fit(std::span<const double> samples, std::size_t bands);
    double apply(std::size_t band, double value) const;
    double invert(std::size_t band, double value) const;
};

/// Labeled band vectors. Samples are row-major [M x bands].
struct SpectralDataset {
    std::size_t bands = 0;
    std::size_t classes = 0;
    std::vector<double> samples;
    std::vector<std::uint32_t> labels;
    std::optional<Normalization> normalization;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {samples.data() + i * bands, bands}; }
    std::vector<std::size_t> class_counts() const;
    std::vector<std::size_t> indices_of(std::uint32_t cls) const;
    SpectralDataset subset(std::span<const std::size_t> indices) const;

    /// Throws DataError when shapes disagree, a label is out of range, or
    /// (if require_all_classes) a class has no samples.
    void validate(bool require_all_classes = true) const;
};

enum class Format { Csv, Bin };

Format format_from_path(const std::filesystem::path& path);
Format parse_format(const std::string& name);

/// CSV: header "d=<int>,N=<int>", then one row per sample of d values and an
/// integer label. Bin: little-endian "MGSD" container with f64 values.
SpectralDataset load_dataset(const std::filesystem::path& path, Format format);
SpectralDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const SpectralDataset& ds, const std::filesystem::path& path, Format format);
void save_dataset(const SpectralDataset& ds, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_bin(const SpectralDataset& ds);
SpectralDataset decode_bin(std::span<const std::uint8_t> bytes);
SpectralDataset parse_csv(const std::string& text);
std::string format_csv(const SpectralDataset& ds);

struct SplitSpec {
    double tttr = 0.1;
    std::uint64_t seed = 0;
    bool stratified = true;
};

/// Per-class train count: max(1, round(tttr * n)), capped at n - 1 when the
/// class has at least two samples so the test side keeps one.
std::size_t train_count(double tttr, std::size_t class_size);

/// Stratified split; both sides keep the original sample order.
std::pair<SpectralDataset, SpectralDataset> split_tttr(const SpectralDataset& ds, const SplitSpec& spec);

/// Returns a copy mapped through `norm` and carrying it as its record.
SpectralDataset normalize(const SpectralDataset& ds, const Normalization& norm);
SpectralDataset denormalize(const SpectralDataset& ds);

struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::size_t classes = 4;
    std::size_t bands = 64;
    std::vector<std::size_t> sizes;
    double overlap = 0.0;
    /// Standard deviation of the per-band white noise (uniformly distributed).
    double noise = 0.01;
};

/// Seeded imbalanced spectra. Each class template is a baseline plus three
/// Gaussian bumps; samples vary by a random gain, a random smooth bump, and
/// white noise, all uniform with fixed standard deviations. `overlap` in [0, 1] pulls the smallest class's template
/// toward the largest class's template (1 = identical templates).
SpectralDataset make_synthetic(const SyntheticSpec& spec);

/// Class templates make_synthetic draws samples around, row-major [N x d].
std::vector<double> synthetic_templates(const SyntheticSpec& spec);

/// FNV-1a 64-bit hash of a byte range (dataset fingerprints in manifests).
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);

}  // namespace mgsgan::data
