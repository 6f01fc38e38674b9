#pragma once

#include "mgsgan/tensor.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace mgsgan::nn {

using ad::Shape;
using ad::Tensor;
using Rng = std::mt19937_64;

enum class Mode { Train, Eval };

/// Tags written into checkpoints; values are part of the file format.
enum class LayerKind : std::uint32_t {
    Dense = 1,
    Conv1d = 2,
    ConvTranspose1d = 3,
    BatchNorm = 4,
    ReLU = 5,
    LeakyReLU = 6,
    Tanh = 7,
    Sigmoid = 8,
    Reshape = 9,
    Flatten = 10,
};

std::string to_string(LayerKind kind);

/// Xavier/Glorot normal init: N(0, std^2) with
/// std = gain * sqrt(2 / (fan_in + fan_out)).
double xavier_std(std::size_t fan_in, std::size_t fan_out, double gain = 1.0);
Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, double gain, Rng& rng, Shape shape);

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;

    /// Trainable tensors.
    virtual std::vector<Tensor> parameters() const { return {}; }
    /// Every tensor persisted in a checkpoint (parameters plus buffers).
    virtual std::vector<Tensor> state() const { return parameters(); }
    /// Integer hyperparameters persisted in a checkpoint.
    virtual std::vector<std::uint32_t> shape_ints() const { return {}; }
    virtual std::vector<float> hyper_floats() const { return {}; }
};

class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);
    Dense(Tensor weight, Tensor bias);

    LayerKind kind() const override { return LayerKind::Dense; }
    Tensor forward(const Tensor& x, Mode mode) override;
    std::unique_ptr<Layer> clone() const override;
    std::vector<Tensor> parameters() const override { return {weight_, bias_}; }
    std::vector<std::uint32_t> shape_ints() const override;

    std::size_t fan_in() const { return weight_.dim(1); }
    std::size_t fan_out() const { return weight_.dim(0); }
    Tensor& weight() { return weight_; }
    Tensor& bias() { return bias_; }

private:
    Tensor weight_;  // [out, in]
    Tensor bias_;    // [out]
};

struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

class Conv1d final : public Layer {
public:
    Conv1d(ConvSpec spec, Rng& rng, double gain = 1.0);
    Conv1d(ConvSpec spec, Tensor weight, Tensor bias);

    LayerKind kind() const override { return LayerKind::Conv1d; }
    Tensor forward(const Tensor& x, Mode mode) override;
    std::unique_ptr<Layer> clone() const override;
    std::vector<Tensor> parameters() const override { return {weight_, bias_}; }
    std::vector<std::uint32_t> shape_ints() const override;

    const ConvSpec& spec() const { return spec_; }
    std::size_t fan_in() const { return spec_.in_channels * spec_.kernel; }
    std::size_t fan_out() const { return spec_.out_channels * spec_.kernel; }
    std::size_t output_length(std::size_t in_length) const;

private:
    ConvSpec spec_;
    Tensor weight_;  // [out, in, K]
    Tensor bias_;    // [out]
};

/// Transposed convolution mapping in_channels -> out_channels and producing
/// a fixed output length. Weight layout [in, out, K]: the adjoint of a
/// Conv1d from out_channels to in_channels.
class ConvTranspose1d final : public Layer {
public:
    ConvTranspose1d(ConvSpec spec, std::size_t out_length, Rng& rng, double gain = 1.0);
    ConvTranspose1d(ConvSpec spec, std::size_t out_length, Tensor weight, Tensor bias);

    LayerKind kind() const override { return LayerKind::ConvTranspose1d; }
    Tensor forward(const Tensor& x, Mode mode) override;
    std::unique_ptr<Layer> clone() const override;
    std::vector<Tensor> parameters() const override { return {weight_, bias_}; }
    std::vector<std::uint32_t> shape_ints() const override;

    const ConvSpec& spec() const { return spec_; }
    std::size_t out_length() const { return out_length_; }
    /// Input length this layer expects.
    std::size_t in_length() const;
    std::size_t fan_in() const { return spec_.in_channels * spec_.kernel; }
    std::size_t fan_out() const { return spec_.out_channels * spec_.kernel; }

private:
    ConvSpec spec_;
    std::size_t out_length_;
    Tensor weight_;
    Tensor bias_;
};

class BatchNorm final : public Layer {
public:
    static constexpr double kDefaultEps = 1e-5;
    static constexpr double kDefaultMomentum = 0.1;

    explicit BatchNorm(std::size_t channels, double eps = kDefaultEps, double momentum = kDefaultMomentum);
    BatchNorm(double eps, double momentum, Tensor gamma, Tensor beta, Tensor running_mean, Tensor running_var);

    LayerKind kind() const override { return LayerKind::BatchNorm; }
    Tensor forward(const Tensor& x, Mode mode) override;
    std::unique_ptr<Layer> clone() const override;
    std::vector<Tensor> parameters() const override { return {gamma_, beta_}; }
    std::vector<Tensor> state() const override { return {gamma_, beta_, running_mean_, running_var_}; }
    std::vector<std::uint32_t> shape_ints() const override;
    std::vector<float> hyper_floats() const override;

    Tensor& gamma() { return gamma_; }
    Tensor& beta() { return beta_; }
    const Tensor& running_mean() const { return running_mean_; }
    const Tensor& running_var() const { return running_var_; }

private:
    double eps_;
    double momentum_;
    Tensor gamma_, beta_, running_mean_, running_var_;
};

class Activation final : public Layer {
public:
    /// kind must be ReLU, LeakyReLU, Tanh or Sigmoid.
    explicit Activation(LayerKind kind, double negative_slope = 0.0);

    LayerKind kind() const override { return kind_; }
    Tensor forward(const Tensor& x, Mode mode) override;
    std::unique_ptr<Layer> clone() const override;
    std::vector<float> hyper_floats() const override;

private:
    LayerKind kind_;
    double slope_;
};

/// Reshape to [B, dims...]; an empty dims list flattens to [B, F].
class Reshape final : public Layer {
public:
    explicit Reshape(Shape dims);

    LayerKind kind() const override { return dims_.empty() ? LayerKind::Flatten : LayerKind::Reshape; }
    Tensor forward(const Tensor& x, Mode mode) override;
    std::unique_ptr<Layer> clone() const override;
    std::vector<std::uint32_t> shape_ints() const override;

private:
    Shape dims_;
};

/// Rebuilds a layer from its checkpoint record.
std::unique_ptr<Layer> make_layer(LayerKind kind, const std::vector<std::uint32_t>& ints,
                                  const std::vector<float>& floats, std::vector<Tensor> tensors);

class Sequential {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    Sequential& add(std::unique_ptr<Layer> layer);
    template <class L, class... Args>
    Sequential& emplace(Args&&... args) {
        return add(std::make_unique<L>(std::forward<Args>(args)...));
    }

    Tensor forward(const Tensor& x, Mode mode) const;
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
    void set_trainable(bool on) const;

    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) const { return *layers_.at(i); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Each parameter keeps first/second moment
/// buffers of its own shape.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    /// Applies one update. Every parameter must hold a gradient.
    void step();
    /// Drops every parameter's gradient buffer.
    void zero_grad();
    std::uint64_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace mgsgan::nn
