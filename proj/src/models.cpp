#include "mgsgan/models.hpp"

#include "mgsgan/errors.hpp"
#include "mgsgan/kernels.hpp"

#include <algorithm>
#include <numeric>

namespace mgsgan::models {

using nn::LayerKind;

bool ClassDomain::contains(std::span<const double> x) const {
    if (x.size() != lower.size()) return false;
    for (std::size_t b = 0; b < x.size(); ++b) {
        if (x[b] < lower[b] || x[b] > upper[b]) return false;
    }
    return true;
}

std::vector<ClassDomain> compute_class_domains(const data::SpectralDataset& train, double margin) {
    if (!(margin >= 0.0)) throw ContractError("class domains: margin must be >= 0");
    const std::size_t d = train.bands;
    std::vector<ClassDomain> out(train.classes);
    std::vector<bool> seen(train.classes, false);
    for (std::size_t c = 0; c < train.classes; ++c) out[c].class_id = static_cast<std::uint32_t>(c);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto y = train.labels[i];
        const auto r = train.row(i);
        auto& dom = out.at(y);
        if (!seen[y]) {
            dom.lower.assign(r.begin(), r.end());
            dom.upper = dom.lower;
            seen[y] = true;
            continue;
        }
        for (std::size_t b = 0; b < d; ++b) {
            dom.lower[b] = std::min(dom.lower[b], r[b]);
            dom.upper[b] = std::max(dom.upper[b], r[b]);
        }
    }
    for (std::size_t c = 0; c < train.classes; ++c) {
        if (!seen[c]) throw DataError("class " + std::to_string(c) + " has no training samples");
        auto& dom = out[c];
        for (std::size_t b = 0; b < d; ++b) {
            const double widen = margin * (dom.upper[b] - dom.lower[b]);
            dom.lower[b] -= widen;
            dom.upper[b] += widen;
        }
    }
    return out;
}

std::string to_string(GameMode mode) {
    switch (mode) {
        case GameMode::Mgsgan: return "mgsgan";
        case GameMode::Acsgan: return "acsgan";
        case GameMode::Achsgan: return "achsgan";
    }
    return "unknown";
}

GameMode parse_game_mode(const std::string& name) {
    if (name == "mgsgan") return GameMode::Mgsgan;
    if (name == "acsgan") return GameMode::Acsgan;
    if (name == "achsgan") return GameMode::Achsgan;
    throw ContractError("unknown mode '" + name + "' (expected mgsgan, acsgan or achsgan)");
}

Tensor one_hot(std::span<const std::uint32_t> labels, std::size_t classes) {
    std::vector<double> v(labels.size() * classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) throw ContractError("one_hot: label " + std::to_string(labels[i]) + " out of range");
        v[i * classes + labels[i]] = 1.0;
    }
    return Tensor::from({labels.size(), classes}, std::move(v));
}

namespace {

std::size_t half(std::size_t len, std::size_t kernel) {
    return kernels::conv_output_length(len, kernel, 2, kernel / 2);
}

nn::Sequential make_generator(std::size_t classes, std::size_t bands, const ArchConfig& a, Rng& rng) {
    const std::size_t k = a.gen_kernel, p = k / 2;
    const std::size_t l1 = half(bands, k);
    const std::size_t l0 = half(l1, k);
    if (l0 == 0) throw ContractError("generator: too few bands for the transposed-conv stack");
    nn::Sequential g;
    g.emplace<nn::Dense>(a.noise_dim + classes, a.gen_channels_first * l0, rng);
    g.emplace<nn::Activation>(LayerKind::ReLU);
    g.emplace<nn::Reshape>(nn::Shape{a.gen_channels_first, l0});
    g.emplace<nn::ConvTranspose1d>(nn::ConvSpec{a.gen_channels_first, a.gen_channels_second, k, 2, p}, l1, rng);
    g.emplace<nn::Activation>(LayerKind::ReLU);
    g.emplace<nn::ConvTranspose1d>(nn::ConvSpec{a.gen_channels_second, 1, k, 2, p}, bands, rng);
    g.emplace<nn::Reshape>(nn::Shape{});
    g.emplace<nn::Activation>(LayerKind::Tanh);
    return g;
}

}  // namespace

// ---- GeneratorBank ------------------------------------------------------------------

GeneratorBank::GeneratorBank(std::size_t classes, std::size_t bands, const ArchConfig& arch, bool mixture,
                             std::vector<ClassDomain> domains, Rng& rng)
    : classes_(classes), bands_(bands), noise_dim_(arch.noise_dim), mixture_(mixture), domains_(std::move(domains)) {
    const std::size_t count = mixture ? classes : 1;
    for (std::size_t i = 0; i < count; ++i) networks_.push_back(make_generator(classes, bands, arch, rng));
    if (mixture_ && domains_.size() != classes_) {
        throw ContractError("generator bank: mixture mode needs one domain per class");
    }
}

GeneratorBank::GeneratorBank(std::size_t classes, std::size_t bands, std::size_t noise_dim, bool mixture,
                             std::vector<nn::Sequential> networks, std::vector<ClassDomain> domains)
    : classes_(classes),
      bands_(bands),
      noise_dim_(noise_dim),
      mixture_(mixture),
      networks_(std::move(networks)),
      domains_(std::move(domains)) {
    if (networks_.size() != (mixture_ ? classes_ : 1)) throw DataError("generator bank: wrong network count");
    if (mixture_ && domains_.size() != classes_) throw DataError("generator bank: mixture mode needs one domain per class");
}

void GeneratorBank::check_class(std::uint32_t cls) const {
    if (cls >= classes_) {
        throw ContractError("generator: class " + std::to_string(cls) + " outside [0," + std::to_string(classes_) + ")");
    }
}

const nn::Sequential& GeneratorBank::network_for(std::uint32_t cls) const {
    check_class(cls);
    return networks_[mixture_ ? cls : 0];
}

Tensor GeneratorBank::raw(const Tensor& z, std::uint32_t cls, Mode mode) const {
    check_class(cls);
    if (z.rank() != 2 || z.dim(1) != noise_dim_) {
        throw DimensionError("generator: noise shape " + ad::shape_string(z.shape()) + ", expected [B," +
                             std::to_string(noise_dim_) + "]");
    }
    const std::vector<std::uint32_t> labels(z.dim(0), cls);
    const Tensor input = ad::concat({z, one_hot(labels, classes_)}, 1);
    return network_for(cls).forward(input, mode);
}

Tensor GeneratorBank::generate(const Tensor& z, std::uint32_t cls, Mode mode) const {
    Tensor x = raw(z, cls, mode);
    if (!mixture_) return x;
    const auto& dom = domains_[cls];
    return ad::clamp_box(x, dom.lower, dom.upper);
}

Tensor GeneratorBank::generate_batch(const Tensor& z, std::span<const std::uint32_t> labels, Mode mode) const {
    if (z.rank() != 2 || z.dim(0) != labels.size()) {
        throw DimensionError("generator: noise shape " + ad::shape_string(z.shape()) + " for " +
                             std::to_string(labels.size()) + " labels");
    }
    if (!mixture_) {
        for (auto c : labels) check_class(c);
        const Tensor input = ad::concat({z, one_hot(labels, classes_)}, 1);
        return networks_[0].forward(input, mode);
    }
    // Labels must arrive grouped by class so each generator runs once.
    std::vector<Tensor> parts;
    std::size_t begin = 0;
    while (begin < labels.size()) {
        std::size_t end = begin;
        while (end < labels.size() && labels[end] == labels[begin]) ++end;
        parts.push_back(generate(ad::slice_rows(z, begin, end), labels[begin], mode));
        begin = end;
    }
    if (parts.size() == 1) return parts.front();
    return ad::concat(parts, 0);
}

std::vector<Tensor> GeneratorBank::parameters() const {
    std::vector<Tensor> out;
    for (const auto& n : networks_) {
        auto p = n.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

void GeneratorBank::set_trainable(bool on) const {
    for (const auto& n : networks_) n.set_trainable(on);
}

// ---- Discriminator ------------------------------------------------------------------

Discriminator::Discriminator(std::size_t bands, std::size_t outputs, const ArchConfig& a, Rng& rng)
    : bands_(bands), outputs_(outputs) {
    const std::size_t k = a.disc_kernel, p = k / 2;
    const std::size_t l1 = half(bands, k);
    const std::size_t l2 = half(l1, k);
    if (l2 == 0) throw ContractError("discriminator: too few bands");
    network_.emplace<nn::Reshape>(nn::Shape{1, bands});
    network_.emplace<nn::Conv1d>(nn::ConvSpec{1, a.disc_channels_first, k, 2, p}, rng);
    network_.emplace<nn::Activation>(LayerKind::LeakyReLU, a.leaky_slope);
    network_.emplace<nn::Conv1d>(nn::ConvSpec{a.disc_channels_first, a.disc_channels_second, k, 2, p}, rng);
    network_.emplace<nn::Activation>(LayerKind::LeakyReLU, a.leaky_slope);
    network_.emplace<nn::Reshape>(nn::Shape{});
    network_.emplace<nn::Dense>(a.disc_channels_second * l2, outputs, rng);
    if (outputs == 1) network_.emplace<nn::Activation>(LayerKind::Sigmoid);
}

Discriminator::Discriminator(std::size_t bands, nn::Sequential network) : bands_(bands), network_(std::move(network)) {
    outputs_ = 0;
    for (std::size_t i = network_.size(); i-- > 0;) {
        if (auto* d = dynamic_cast<nn::Dense*>(&network_.layer(i))) {
            outputs_ = d->fan_out();
            break;
        }
    }
    if (outputs_ == 0) throw DataError("discriminator network has no dense output layer");
}

Tensor Discriminator::forward(const Tensor& x, Mode mode) const {
    if (x.rank() != 2 || x.dim(1) != bands_) {
        throw DimensionError("discriminator: input " + ad::shape_string(x.shape()) + ", expected [B," +
                             std::to_string(bands_) + "]");
    }
    Tensor out = network_.forward(x, mode);
    if (outputs_ == 1) return ad::reshape(out, {x.dim(0)});
    return ad::softmax(out);
}

// ---- Classifier ---------------------------------------------------------------------------

Classifier::Classifier(std::size_t bands, std::size_t classes, const ArchConfig& a, Rng& rng)
    : bands_(bands), classes_(classes) {
    if (a.cls_kernels.empty()) throw ContractError("classifier: need at least one branch");
    std::size_t features = 0;
    for (std::size_t k : a.cls_kernels) {
        const std::size_t p = k / 2;
        const std::size_t l1 = kernels::conv_output_length(bands, k, 2, p);
        const std::size_t l2 = kernels::conv_output_length(l1, k, 2, p);
        if (l2 == 0) throw ContractError("classifier: kernel " + std::to_string(k) + " too large for input");
        nn::Sequential b;
        b.emplace<nn::Reshape>(nn::Shape{1, bands});
        b.emplace<nn::Conv1d>(nn::ConvSpec{1, a.cls_channels_first, k, 2, p}, rng);
        b.emplace<nn::BatchNorm>(a.cls_channels_first);
        b.emplace<nn::Activation>(LayerKind::LeakyReLU, a.leaky_slope);
        b.emplace<nn::Conv1d>(nn::ConvSpec{a.cls_channels_first, a.cls_channels_second, k, 2, p}, rng);
        b.emplace<nn::Activation>(LayerKind::LeakyReLU, a.leaky_slope);
        b.emplace<nn::Reshape>(nn::Shape{});
        branches_.push_back(std::move(b));
        features += a.cls_channels_second * l2;
    }
    head_.emplace<nn::Dense>(features, classes, rng);
}

Classifier::Classifier(std::size_t bands, std::size_t classes, std::vector<nn::Sequential> branches,
                       nn::Sequential head)
    : bands_(bands), classes_(classes), branches_(std::move(branches)), head_(std::move(head)) {
    if (branches_.empty()) throw DataError("classifier: no branches");
}

Tensor Classifier::logits(const Tensor& x, Mode mode) const {
    if (x.rank() != 2 || x.dim(1) != bands_) {
        throw DimensionError("classifier: input " + ad::shape_string(x.shape()) + ", expected [B," +
                             std::to_string(bands_) + "]");
    }
    std::vector<Tensor> feats;
    feats.reserve(branches_.size());
    for (const auto& b : branches_) feats.push_back(b.forward(x, mode));
    Tensor h = feats.size() == 1 ? feats.front() : ad::concat(feats, 1);
    return head_.forward(h, mode);
}

Tensor Classifier::forward(const Tensor& x, Mode mode) const { return ad::softmax(logits(x, mode)); }

std::vector<Tensor> Classifier::parameters() const {
    std::vector<Tensor> out;
    for (const auto& b : branches_) {
        auto p = b.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    auto p = head_.parameters();
    out.insert(out.end(), p.begin(), p.end());
    return out;
}

void Classifier::set_trainable(bool on) const {
    for (const auto& b : branches_) b.set_trainable(on);
    head_.set_trainable(on);
}

// ---- GanModels ------------------------------------------------------------------------------

GanModels build_models(GameMode mode, std::size_t classes, std::size_t bands, const ArchConfig& arch,
                       std::vector<ClassDomain> domains, Rng& rng) {
    GanModels m;
    m.mode = mode;
    m.classes = classes;
    m.bands = bands;
    m.noise_dim = arch.noise_dim;
    m.generators = GeneratorBank(classes, bands, arch, mode == GameMode::Mgsgan, std::move(domains), rng);
    m.discriminator = Discriminator(bands, mode == GameMode::Achsgan ? classes + 1 : 1, arch, rng);
    if (mode != GameMode::Achsgan) m.classifier = Classifier(bands, classes, arch, rng);
    return m;
}

Tensor GanModels::class_probabilities(const Tensor& x) const {
    if (classifier) return classifier->forward(x, Mode::Eval);
    const Tensor p = discriminator.forward(x, Mode::Eval);
    const std::size_t b = p.dim(0), n = classes;
    std::vector<double> out(b * n);
    for (std::size_t r = 0; r < b; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += p[r * (n + 1) + j];
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = total > 0.0 ? p[r * (n + 1) + j] / total : 1.0 / n;
    }
    return Tensor::from({b, n}, std::move(out));
}

std::vector<std::uint32_t> GanModels::predict(const data::SpectralDataset& ds) const {
    if (ds.bands != bands) {
        throw DataError("dataset has " + std::to_string(ds.bands) + " bands, model expects " + std::to_string(bands));
    }
    constexpr std::size_t kChunk = 512;
    std::vector<std::uint32_t> out;
    out.reserve(ds.size());
    for (std::size_t begin = 0; begin < ds.size(); begin += kChunk) {
        const std::size_t end = std::min(ds.size(), begin + kChunk);
        std::vector<double> rows(ds.samples.begin() + static_cast<std::ptrdiff_t>(begin * bands),
                                 ds.samples.begin() + static_cast<std::ptrdiff_t>(end * bands));
        const Tensor p = class_probabilities(Tensor::from({end - begin, bands}, std::move(rows)));
        for (std::size_t r = 0; r < end - begin; ++r) {
            const auto row = p.values().subspan(r * classes, classes);
            out.push_back(static_cast<std::uint32_t>(std::distance(row.begin(), std::max_element(row.begin(), row.end()))));
        }
    }
    return out;
}

}  // namespace mgsgan::models
