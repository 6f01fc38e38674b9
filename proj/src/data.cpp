#include "mgsgan/data.hpp"

#include "binary_io.hpp"
#include "mgsgan/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace mgsgan::data {

namespace {
constexpr std::string_view kBinMagic = "MGSD";
constexpr std::uint32_t kBinVersion = 1;
}  // namespace

// ---- Normalization -------------------------------------------------------------

Normalization Normalization::fit(std::span<const double> samples, std::size_t bands) {
    if (bands == 0 || samples.empty() || samples.size() % bands) {
        throw ContractError("normalization: need a non-empty [M x d] sample matrix");
    }
    Normalization n;
    n.min.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(bands));
    n.max = n.min;
    for (std::size_t i = bands; i < samples.size(); ++i) {
        const std::size_t b = i % bands;
        n.min[b] = std::min(n.min[b], samples[i]);
        n.max[b] = std::max(n.max[b], samples[i]);
    }
    return n;
}

double Normalization::apply(std::size_t band, double value) const {
    const double span = max[band] - min[band];
    if (span <= 0.0) return 0.0;
    return 2.0 * (value - min[band]) / span - 1.0;
}

double Normalization::invert(std::size_t band, double value) const {
    const double span = max[band] - min[band];
    if (span <= 0.0) return min[band];
    return (value + 1.0) * 0.5 * span + min[band];
}

// ---- SpectralDataset -------------------------------------------------------------

std::vector<std::size_t> SpectralDataset::class_counts() const {
    std::vector<std::size_t> counts(classes, 0);
    for (auto y : labels) {
        if (y < classes) ++counts[y];
    }
    return counts;
}

std::vector<std::size_t> SpectralDataset::indices_of(std::uint32_t cls) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) out.push_back(i);
    }
    return out;
}

SpectralDataset SpectralDataset::subset(std::span<const std::size_t> indices) const {
    SpectralDataset out;
    out.bands = bands;
    out.classes = classes;
    out.normalization = normalization;
    out.samples.reserve(indices.size() * bands);
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        const auto r = row(i);
        out.samples.insert(out.samples.end(), r.begin(), r.end());
        out.labels.push_back(labels[i]);
    }
    return out;
}

void SpectralDataset::validate(bool require_all_classes) const {
    if (bands == 0) throw DataError("dataset has zero bands");
    if (classes == 0) throw DataError("dataset has zero classes");
    if (samples.size() != labels.size() * bands) {
        throw DataError("dataset holds " + std::to_string(samples.size()) + " values for " +
                        std::to_string(labels.size()) + " samples of " + std::to_string(bands) + " bands");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) {
            throw DataError("sample " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                            " outside [0," + std::to_string(classes) + ")");
        }
    }
    for (double v : samples) {
        if (!std::isfinite(v)) throw DataError("dataset contains a non-finite value");
    }
    if (require_all_classes) {
        const auto counts = class_counts();
        for (std::size_t c = 0; c < classes; ++c) {
            if (counts[c] == 0) throw DataError("class " + std::to_string(c) + " has no samples");
        }
    }
    if (normalization && (normalization->min.size() != bands || normalization->max.size() != bands)) {
        throw DataError("normalization record does not match band count");
    }
}

// ---- formats ------------------------------------------------------------------------

Format format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".bin" ? Format::Bin : Format::Csv;
}

Format parse_format(const std::string& name) {
    if (name == "csv") return Format::Csv;
    if (name == "bin") return Format::Bin;
    throw ContractError("unknown dataset format '" + name + "' (expected csv or bin)");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
    field = trim(field);
    T value{};
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw ParseError(std::string("bad ") + what + " '" + std::string(field) + "'", line);
    }
    return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::size_t parse_header_field(std::string_view field, std::string_view key) {
    field = trim(field);
    if (field.substr(0, key.size() + 1) != std::string(key) + "=") {
        throw ParseError("header must be 'd=<int>,N=<int>'", 1);
    }
    return parse_number<std::size_t>(field.substr(key.size() + 1), 1, "header value");
}

}  // namespace

SpectralDataset parse_csv(const std::string& text) {
    SpectralDataset ds;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        const auto fields = split_commas(view);
        if (!header) {
            if (fields.size() != 2) throw ParseError("header must be 'd=<int>,N=<int>'", lineno);
            ds.bands = parse_header_field(fields[0], "d");
            ds.classes = parse_header_field(fields[1], "N");
            if (ds.bands == 0 || ds.classes == 0) throw ParseError("d and N must be positive", lineno);
            header = true;
            continue;
        }
        if (fields.size() != ds.bands + 1) {
            throw ParseError("expected " + std::to_string(ds.bands) + " values and a label, got " +
                                 std::to_string(fields.size()) + " fields",
                             lineno);
        }
        for (std::size_t b = 0; b < ds.bands; ++b) ds.samples.push_back(parse_number<double>(fields[b], lineno, "value"));
        const auto label = parse_number<long long>(fields[ds.bands], lineno, "label");
        if (label < 0 || static_cast<std::size_t>(label) >= ds.classes) {
            throw DataError("label " + std::to_string(label) + " out of range [0," + std::to_string(ds.classes) +
                            ") at line " + std::to_string(lineno));
        }
        ds.labels.push_back(static_cast<std::uint32_t>(label));
    }
    if (!header) throw ParseError("missing 'd=<int>,N=<int>' header", 0);
    ds.validate();
    return ds;
}

std::string format_csv(const SpectralDataset& ds) {
    std::string out = "d=" + std::to_string(ds.bands) + ",N=" + std::to_string(ds.classes) + "\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.row(i)) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            out.append(buf, ptr);
            out.push_back(',');
        }
        out += std::to_string(ds.labels[i]);
        out.push_back('\n');
    }
    return out;
}

std::vector<std::uint8_t> encode_bin(const SpectralDataset& ds) {
    io::ByteWriter w;
    w.bytes(kBinMagic);
    w.u32(kBinVersion);
    w.u32(static_cast<std::uint32_t>(ds.bands));
    w.u32(static_cast<std::uint32_t>(ds.classes));
    w.u64(ds.size());
    w.u32(ds.normalization ? 1 : 0);
    if (ds.normalization) {
        for (double v : ds.normalization->min) w.f64(v);
        for (double v : ds.normalization->max) w.f64(v);
    }
    for (double v : ds.samples) w.f64(v);
    for (auto y : ds.labels) w.u32(y);
    return std::move(w.buffer());
}

SpectralDataset decode_bin(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes, "dataset");
    if (r.bytes(4) != kBinMagic) throw ParseError("not an MGSD dataset file", 0);
    if (const auto v = r.u32(); v != kBinVersion) throw ParseError("unsupported dataset version " + std::to_string(v), 0);
    SpectralDataset ds;
    ds.bands = r.u32();
    ds.classes = r.u32();
    const std::uint64_t m = r.u64();
    if (r.u32()) {
        Normalization n;
        n.min.resize(ds.bands);
        n.max.resize(ds.bands);
        for (auto& v : n.min) v = r.f64();
        for (auto& v : n.max) v = r.f64();
        ds.normalization = std::move(n);
    }
    if (m * (ds.bands * 8 + 4) != r.remaining()) throw ParseError("dataset payload size mismatch", 0);
    ds.samples.resize(m * ds.bands);
    for (auto& v : ds.samples) v = r.f64();
    ds.labels.resize(m);
    for (auto& y : ds.labels) y = r.u32();
    ds.validate(false);
    return ds;
}

SpectralDataset load_dataset(const std::filesystem::path& path, Format format) {
    const auto bytes = io::read_file(path);
    if (format == Format::Bin) return decode_bin(bytes);
    return parse_csv(std::string(bytes.begin(), bytes.end()));
}

SpectralDataset load_dataset(const std::filesystem::path& path) { return load_dataset(path, format_from_path(path)); }

void save_dataset(const SpectralDataset& ds, const std::filesystem::path& path, Format format) {
    ds.validate(false);
    if (format == Format::Bin) {
        io::write_file(path, encode_bin(ds));
    } else {
        const std::string text = format_csv(ds);
        io::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    }
}

void save_dataset(const SpectralDataset& ds, const std::filesystem::path& path) {
    save_dataset(ds, path, format_from_path(path));
}

// ---- splitting / normalization ----------------------------------------------------------

std::size_t train_count(double tttr, std::size_t class_size) {
    if (class_size == 0) return 0;
    auto n = static_cast<std::size_t>(std::llround(tttr * static_cast<double>(class_size)));
    n = std::max<std::size_t>(n, 1);
    if (class_size >= 2) n = std::min(n, class_size - 1);
    return n;
}

std::pair<SpectralDataset, SpectralDataset> split_tttr(const SpectralDataset& ds, const SplitSpec& spec) {
    if (!(spec.tttr > 0.0 && spec.tttr < 1.0)) throw ContractError("split: tttr must lie in (0, 1)");
    ds.validate();
    std::mt19937_64 rng(spec.seed);
    std::vector<std::size_t> train_idx, test_idx;
    for (std::uint32_t c = 0; c < ds.classes; ++c) {
        auto idx = ds.indices_of(c);
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t n = train_count(spec.tttr, idx.size());
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
        test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {ds.subset(train_idx), ds.subset(test_idx)};
}

SpectralDataset normalize(const SpectralDataset& ds, const Normalization& norm) {
    if (norm.min.size() != ds.bands) throw ContractError("normalization band count mismatch");
    SpectralDataset out = ds;
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = norm.apply(i % ds.bands, ds.samples[i]);
    out.normalization = norm;
    return out;
}

SpectralDataset denormalize(const SpectralDataset& ds) {
    if (!ds.normalization) throw ContractError("denormalize: dataset carries no normalization record");
    SpectralDataset out = ds;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] = ds.normalization->invert(i % ds.bands, ds.samples[i]);
    }
    out.normalization.reset();
    return out;
}

// ---- synthetic data -------------------------------------------------------------------------

namespace {

struct Bump {
    double center, width, amplitude;
};

double eval_bumps(const std::vector<Bump>& bumps, double x) {
    double s = 0.0;
    for (const auto& b : bumps) {
        const double t = (x - b.center) / b.width;
        s += b.amplitude * std::exp(-0.5 * t * t);
    }
    return s;
}

std::vector<Bump> draw_bumps(std::mt19937_64& rng, std::size_t d, std::size_t count, double amp_lo, double amp_hi) {
    std::uniform_real_distribution<double> center(0.0, static_cast<double>(d));
    std::uniform_real_distribution<double> width(static_cast<double>(d) / 24.0, static_cast<double>(d) / 8.0);
    std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
    std::vector<Bump> out(count);
    for (auto& b : out) b = {center(rng), width(rng), amp(rng)};
    return out;
}

double l2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

void check_synthetic(const SyntheticSpec& spec) {
    if (spec.classes == 0 || spec.bands == 0) throw ContractError("synthetic: classes and bands must be positive");
    if (spec.sizes.size() != spec.classes) {
        throw ContractError("synthetic: " + std::to_string(spec.sizes.size()) + " sizes for " +
                            std::to_string(spec.classes) + " classes");
    }
    for (auto s : spec.sizes) {
        if (s < 2) throw ContractError("synthetic: every class needs at least 2 samples");
    }
    if (!(spec.overlap >= 0.0 && spec.overlap <= 1.0)) throw ContractError("synthetic: overlap must lie in [0, 1]");
    if (!(spec.noise >= 0.0)) throw ContractError("synthetic: noise must be non-negative");
}

constexpr double kGainSd = 0.05;
constexpr double kShapeSd = 0.05;

}  // namespace

std::vector<double> synthetic_templates(const SyntheticSpec& spec) {
    check_synthetic(spec);
    const std::size_t d = spec.bands, n = spec.classes;
    std::mt19937_64 rng(spec.seed);
    const auto baseline = draw_bumps(rng, d, 1, 0.1, 0.2);
    std::vector<double> templates(n * d);
    // Redraw until templates are clearly separated (bounded; the first draw
    // almost always passes).
    const double min_sep = std::max(5.0 * spec.noise, 0.5);
    for (int attempt = 0; attempt < 64; ++attempt) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto bumps = draw_bumps(rng, d, 3, 0.3, 0.8);
            for (std::size_t b = 0; b < d; ++b) {
                const double x = static_cast<double>(b);
                templates[c * d + b] = 0.5 + eval_bumps(baseline, x) + eval_bumps(bumps, x);
            }
        }
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i)
            for (std::size_t j = i + 1; j < n && ok; ++j)
                ok = l2({&templates[i * d], d}, {&templates[j * d], d}) >= min_sep;
        if (ok) break;
    }
    const auto minority = static_cast<std::size_t>(
        std::distance(spec.sizes.rbegin(), std::min_element(spec.sizes.rbegin(), spec.sizes.rend())));
    const std::size_t small = n - 1 - minority;
    const auto large = static_cast<std::size_t>(
        std::distance(spec.sizes.begin(), std::max_element(spec.sizes.begin(), spec.sizes.end())));
    if (small != large && spec.overlap > 0.0) {
        for (std::size_t b = 0; b < d; ++b) {
            const double anchor = templates[large * d + b];
            templates[small * d + b] = anchor + (1.0 - spec.overlap) * (templates[small * d + b] - anchor);
        }
    }
    return templates;
}

SpectralDataset make_synthetic(const SyntheticSpec& spec) {
    const auto templates = synthetic_templates(spec);
    const std::size_t d = spec.bands;
    // Separate stream for per-sample draws so templates do not depend on sizes.
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::vector<double>> shapes(spec.classes, std::vector<double>(d));
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const auto bump = draw_bumps(rng, d, 1, 1.0, 1.0);
        for (std::size_t b = 0; b < d; ++b) shapes[c][b] = eval_bumps(bump, static_cast<double>(b));
    }
    // Bounded (uniform) variation keeps each class inside a finite box that a
    // modest training split already covers.
    const double r3 = std::sqrt(3.0);
    std::uniform_real_distribution<double> gain(-r3 * kGainSd, r3 * kGainSd), shape(-r3 * kShapeSd, r3 * kShapeSd),
        noise(-r3, r3);
    SpectralDataset ds;
    ds.bands = d;
    ds.classes = spec.classes;
    const std::size_t total = std::accumulate(spec.sizes.begin(), spec.sizes.end(), std::size_t{0});
    ds.samples.reserve(total * d);
    ds.labels.reserve(total);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        for (std::size_t s = 0; s < spec.sizes[c]; ++s) {
            const double a = gain(rng);
            const double k = shape(rng);
            for (std::size_t b = 0; b < d; ++b) {
                ds.samples.push_back(templates[c * d + b] * (1.0 + a) + k * shapes[c][b] + spec.noise * noise(rng));
            }
            ds.labels.push_back(static_cast<std::uint32_t>(c));
        }
    }
    return ds;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace mgsgan::data
