#include "mgsgan/nn.hpp"

#include "mgsgan/errors.hpp"
#include "mgsgan/kernels.hpp"

#include <cmath>

namespace mgsgan::nn {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv1d: return "conv1d";
        case LayerKind::ConvTranspose1d: return "conv1d_transpose";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::ReLU: return "relu";
        case LayerKind::LeakyReLU: return "leaky_relu";
        case LayerKind::Tanh: return "tanh";
        case LayerKind::Sigmoid: return "sigmoid";
        case LayerKind::Reshape: return "reshape";
        case LayerKind::Flatten: return "flatten";
    }
    return "unknown";
}

double xavier_std(std::size_t fan_in, std::size_t fan_out, double gain) {
    if (fan_in < 1 || fan_out < 1) throw ContractError("xavier_init: fan_in and fan_out must be >= 1");
    return gain * std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, double gain, Rng& rng, Shape shape) {
    const double sd = xavier_std(fan_in, fan_out, gain);
    std::normal_distribution<double> dist(0.0, sd);
    std::vector<double> values(ad::shape_size(shape));
    for (double& v : values) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(values), true);
}

// ---- Dense -------------------------------------------------------------------

Dense::Dense(std::size_t in, std::size_t out, Rng& rng, double gain)
    : weight_(xavier_init(in, out, gain, rng, {out, in})), bias_(Tensor::zeros({out}, true)) {}

Dense::Dense(Tensor weight, Tensor bias) : weight_(std::move(weight)), bias_(std::move(bias)) {
    if (weight_.rank() != 2 || bias_.shape() != Shape{weight_.dim(0)}) {
        throw DimensionError("dense: weight " + ad::shape_string(weight_.shape()) + " and bias " +
                             ad::shape_string(bias_.shape()) + " disagree");
    }
}

Tensor Dense::forward(const Tensor& x, Mode) { return ad::linear(x, weight_, bias_); }

std::unique_ptr<Layer> Dense::clone() const { return std::make_unique<Dense>(weight_.clone(), bias_.clone()); }

std::vector<std::uint32_t> Dense::shape_ints() const {
    return {static_cast<std::uint32_t>(fan_in()), static_cast<std::uint32_t>(fan_out())};
}

// ---- Conv1d ------------------------------------------------------------------

namespace {

void check_spec(const ConvSpec& s) {
    if (!s.in_channels || !s.out_channels || !s.kernel || !s.stride) {
        throw ContractError("conv layer: channels, kernel and stride must be positive");
    }
}

std::vector<std::uint32_t> spec_ints(const ConvSpec& s) {
    return {static_cast<std::uint32_t>(s.in_channels), static_cast<std::uint32_t>(s.out_channels),
            static_cast<std::uint32_t>(s.kernel), static_cast<std::uint32_t>(s.stride),
            static_cast<std::uint32_t>(s.padding)};
}

}  // namespace

Conv1d::Conv1d(ConvSpec spec, Rng& rng, double gain) : spec_(spec) {
    check_spec(spec_);
    weight_ = xavier_init(fan_in(), fan_out(), gain, rng, {spec_.out_channels, spec_.in_channels, spec_.kernel});
    bias_ = Tensor::zeros({spec_.out_channels}, true);
}

Conv1d::Conv1d(ConvSpec spec, Tensor weight, Tensor bias)
    : spec_(spec), weight_(std::move(weight)), bias_(std::move(bias)) {
    check_spec(spec_);
    if (weight_.shape() != Shape{spec_.out_channels, spec_.in_channels, spec_.kernel} ||
        bias_.shape() != Shape{spec_.out_channels}) {
        throw DimensionError("conv1d: weight " + ad::shape_string(weight_.shape()) + " inconsistent with layer spec");
    }
}

Tensor Conv1d::forward(const Tensor& x, Mode) { return ad::conv1d(x, weight_, bias_, spec_.stride, spec_.padding); }

std::unique_ptr<Layer> Conv1d::clone() const {
    return std::make_unique<Conv1d>(spec_, weight_.clone(), bias_.clone());
}

std::vector<std::uint32_t> Conv1d::shape_ints() const { return spec_ints(spec_); }

std::size_t Conv1d::output_length(std::size_t in_length) const {
    return kernels::conv_output_length(in_length, spec_.kernel, spec_.stride, spec_.padding);
}

// ---- ConvTranspose1d -----------------------------------------------------------

ConvTranspose1d::ConvTranspose1d(ConvSpec spec, std::size_t out_length, Rng& rng, double gain)
    : spec_(spec), out_length_(out_length) {
    check_spec(spec_);
    if (in_length() == 0) throw ContractError("conv1d_transpose: output length too short for kernel");
    weight_ = xavier_init(fan_in(), fan_out(), gain, rng, {spec_.in_channels, spec_.out_channels, spec_.kernel});
    bias_ = Tensor::zeros({spec_.out_channels}, true);
}

ConvTranspose1d::ConvTranspose1d(ConvSpec spec, std::size_t out_length, Tensor weight, Tensor bias)
    : spec_(spec), out_length_(out_length), weight_(std::move(weight)), bias_(std::move(bias)) {
    check_spec(spec_);
    if (weight_.shape() != Shape{spec_.in_channels, spec_.out_channels, spec_.kernel} ||
        bias_.shape() != Shape{spec_.out_channels}) {
        throw DimensionError("conv1d_transpose: weight " + ad::shape_string(weight_.shape()) +
                             " inconsistent with layer spec");
    }
}

std::size_t ConvTranspose1d::in_length() const {
    return kernels::conv_output_length(out_length_, spec_.kernel, spec_.stride, spec_.padding);
}

Tensor ConvTranspose1d::forward(const Tensor& x, Mode) {
    return ad::conv1d_transpose(x, weight_, bias_, spec_.stride, spec_.padding, out_length_);
}

std::unique_ptr<Layer> ConvTranspose1d::clone() const {
    return std::make_unique<ConvTranspose1d>(spec_, out_length_, weight_.clone(), bias_.clone());
}

std::vector<std::uint32_t> ConvTranspose1d::shape_ints() const {
    auto ints = spec_ints(spec_);
    ints.push_back(static_cast<std::uint32_t>(out_length_));
    return ints;
}

// ---- BatchNorm -------------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t channels, double eps, double momentum)
    : eps_(eps),
      momentum_(momentum),
      gamma_(Tensor::full({channels}, 1.0, true)),
      beta_(Tensor::zeros({channels}, true)),
      running_mean_(Tensor::zeros({channels})),
      running_var_(Tensor::full({channels}, 1.0)) {}

BatchNorm::BatchNorm(double eps, double momentum, Tensor gamma, Tensor beta, Tensor running_mean,
                     Tensor running_var)
    : eps_(eps),
      momentum_(momentum),
      gamma_(std::move(gamma)),
      beta_(std::move(beta)),
      running_mean_(std::move(running_mean)),
      running_var_(std::move(running_var)) {
    const Shape s = gamma_.shape();
    if (s.size() != 1 || beta_.shape() != s || running_mean_.shape() != s || running_var_.shape() != s) {
        throw DimensionError("batchnorm: inconsistent parameter shapes");
    }
    running_mean_.set_requires_grad(false);
    running_var_.set_requires_grad(false);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
    if (mode == Mode::Eval) {
        return ad::batch_norm_inference(x, gamma_, beta_, running_mean_.values(), running_var_.values(), eps_);
    }
    if (x.rank() < 1 || x.dim(0) < 2) throw ContractError("batchnorm: train mode needs batch size >= 2");
    const std::size_t c = gamma_.size();
    std::vector<double> stats(2 * c);
    Tensor y = ad::batch_norm(x, gamma_, beta_, eps_, stats);
    const double count = static_cast<double>(x.size() / c);
    auto rm = running_mean_.mutable_values();
    auto rv = running_var_.mutable_values();
    for (std::size_t i = 0; i < c; ++i) {
        const double unbiased = stats[c + i] * count / (count - 1.0);
        rm[i] = (1.0 - momentum_) * rm[i] + momentum_ * stats[i];
        rv[i] = (1.0 - momentum_) * rv[i] + momentum_ * unbiased;
    }
    return y;
}

std::unique_ptr<Layer> BatchNorm::clone() const {
    return std::make_unique<BatchNorm>(eps_, momentum_, gamma_.clone(), beta_.clone(), running_mean_.clone(),
                                       running_var_.clone());
}

std::vector<std::uint32_t> BatchNorm::shape_ints() const { return {static_cast<std::uint32_t>(gamma_.size())}; }

std::vector<float> BatchNorm::hyper_floats() const {
    return {static_cast<float>(eps_), static_cast<float>(momentum_)};
}

// ---- Activation / Reshape ----------------------------------------------------------

Activation::Activation(LayerKind kind, double negative_slope) : kind_(kind), slope_(negative_slope) {
    if (kind != LayerKind::ReLU && kind != LayerKind::LeakyReLU && kind != LayerKind::Tanh &&
        kind != LayerKind::Sigmoid) {
        throw ContractError("activation: unsupported kind " + to_string(kind));
    }
}

Tensor Activation::forward(const Tensor& x, Mode) {
    switch (kind_) {
        case LayerKind::ReLU: return ad::relu(x);
        case LayerKind::LeakyReLU: return ad::leaky_relu(x, slope_);
        case LayerKind::Tanh: return ad::tanh(x);
        default: return ad::sigmoid(x);
    }
}

std::unique_ptr<Layer> Activation::clone() const { return std::make_unique<Activation>(kind_, slope_); }

std::vector<float> Activation::hyper_floats() const {
    if (kind_ == LayerKind::LeakyReLU) return {static_cast<float>(slope_)};
    return {};
}

Reshape::Reshape(Shape dims) : dims_(std::move(dims)) {}

Tensor Reshape::forward(const Tensor& x, Mode) {
    if (dims_.empty()) return ad::flatten(x);
    Shape target{x.dim(0)};
    target.insert(target.end(), dims_.begin(), dims_.end());
    return ad::reshape(x, std::move(target));
}

std::unique_ptr<Layer> Reshape::clone() const { return std::make_unique<Reshape>(dims_); }

std::vector<std::uint32_t> Reshape::shape_ints() const {
    return {dims_.begin(), dims_.end()};
}

// ---- factory ------------------------------------------------------------------------

namespace {

ConvSpec spec_from(const std::vector<std::uint32_t>& ints) {
    return {ints[0], ints[1], ints[2], ints[3], ints[4]};
}

void expect_counts(LayerKind kind, const std::vector<std::uint32_t>& ints, std::size_t n_ints,
                   const std::vector<Tensor>& tensors, std::size_t n_tensors) {
    if (ints.size() != n_ints || tensors.size() != n_tensors) {
        throw DataError("layer record for " + to_string(kind) + " has " + std::to_string(ints.size()) +
                        " ints and " + std::to_string(tensors.size()) + " tensors");
    }
}

}  // namespace

std::unique_ptr<Layer> make_layer(LayerKind kind, const std::vector<std::uint32_t>& ints,
                                  const std::vector<float>& floats, std::vector<Tensor> tensors) {
    for (auto& t : tensors) t.set_requires_grad(true);
    switch (kind) {
        case LayerKind::Dense:
            expect_counts(kind, ints, 2, tensors, 2);
            return std::make_unique<Dense>(std::move(tensors[0]), std::move(tensors[1]));
        case LayerKind::Conv1d:
            expect_counts(kind, ints, 5, tensors, 2);
            return std::make_unique<Conv1d>(spec_from(ints), std::move(tensors[0]), std::move(tensors[1]));
        case LayerKind::ConvTranspose1d:
            expect_counts(kind, ints, 6, tensors, 2);
            return std::make_unique<ConvTranspose1d>(spec_from(ints), ints[5], std::move(tensors[0]),
                                                     std::move(tensors[1]));
        case LayerKind::BatchNorm:
            expect_counts(kind, ints, 1, tensors, 4);
            if (floats.size() != 2) throw DataError("batchnorm record needs eps and momentum");
            return std::make_unique<BatchNorm>(floats[0], floats[1], std::move(tensors[0]), std::move(tensors[1]),
                                               std::move(tensors[2]), std::move(tensors[3]));
        case LayerKind::ReLU:
        case LayerKind::Tanh:
        case LayerKind::Sigmoid:
            expect_counts(kind, ints, 0, tensors, 0);
            return std::make_unique<Activation>(kind);
        case LayerKind::LeakyReLU:
            expect_counts(kind, ints, 0, tensors, 0);
            if (floats.size() != 1) throw DataError("leaky_relu record needs a slope");
            return std::make_unique<Activation>(kind, floats[0]);
        case LayerKind::Reshape:
            expect_counts(kind, ints, ints.size(), tensors, 0);
            if (ints.empty()) throw DataError("reshape record needs target dims");
            return std::make_unique<Reshape>(Shape(ints.begin(), ints.end()));
        case LayerKind::Flatten:
            expect_counts(kind, ints, 0, tensors, 0);
            return std::make_unique<Reshape>(Shape{});
    }
    throw DataError("unknown layer kind tag " + std::to_string(static_cast<std::uint32_t>(kind)));
}

// ---- Sequential ---------------------------------------------------------------------

Sequential::Sequential(const Sequential& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    return *this;
}

Tensor Sequential::forward(const Tensor& x, Mode mode) const {
    Tensor h = x;
    for (const auto& l : layers_) h = l->forward(h, mode);
    return h;
}

std::vector<Tensor> Sequential::parameters() const {
    std::vector<Tensor> out;
    for (const auto& l : layers_) {
        auto p = l->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::size_t Sequential::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

void Sequential::set_trainable(bool on) const {
    for (auto p : parameters()) p.set_requires_grad(on);
}

// ---- Adam -------------------------------------------------------------------------------

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : config_(config), params_(std::move(params)) {
    if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0) {
        throw ContractError("adam: betas must lie in [0, 1)");
    }
    if (config_.lr < 0.0 || config_.eps <= 0.0) throw ContractError("adam: lr must be >= 0 and eps > 0");
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) {
            throw ContractError("adam: parameter " + std::to_string(i) + " of shape " +
                                ad::shape_string(params_[i].shape()) + " has no gradient");
        }
    }
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto w = params_[i].mutable_values();
        const auto g = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            if (config_.lr != 0.0) w[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.clear_grad();
}

}  // namespace mgsgan::nn
