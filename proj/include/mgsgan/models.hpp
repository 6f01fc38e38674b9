#pragma once

#include "mgsgan/data.hpp"
#include "mgsgan/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mgsgan::models {

using ad::Tensor;
using nn::Mode;
using nn::Rng;

/// Per-band axis-aligned box holding one class's training samples.
struct ClassDomain {
    std::uint32_t class_id = 0;
    std::vector<double> lower;
    std::vector<double> upper;

    bool contains(std::span<const double> x) const;
};

/// Per-band min/max over each class's training samples, widened by
/// margin * (upper - lower) on both sides. Throws DataError naming the first
/// class without samples.
std::vector<ClassDomain> compute_class_domains(const data::SpectralDataset& train, double margin);

/// Game variant; values are stored in checkpoints.
enum class GameMode : std::uint32_t {
    Mgsgan = 0,   // N generators, domain-projected, separate D and C
    Acsgan = 1,   // one conditional generator, no projection, separate D and C
    Achsgan = 2,  // one conditional generator, D with N+1 outputs, no C
};

std::string to_string(GameMode mode);
GameMode parse_game_mode(const std::string& name);

struct ArchConfig {
    std::size_t noise_dim = 100;
    std::size_t gen_channels_first = 32;
    std::size_t gen_channels_second = 16;
    std::size_t gen_kernel = 5;
    std::size_t disc_channels_first = 16;
    std::size_t disc_channels_second = 32;
    std::size_t disc_kernel = 5;
    std::vector<std::size_t> cls_kernels{3, 5, 7};
    std::size_t cls_channels_first = 8;
    std::size_t cls_channels_second = 16;
    double leaky_slope = 0.2;
};

/// The generator side of the game. In mixture mode there is one network per
/// class and outputs are clamped into that class's domain; in single mode one
/// conditional network serves every class and nothing is clamped. Every
/// network takes [z, one_hot(c)] as input.
class GeneratorBank {
public:
    GeneratorBank() = default;
    GeneratorBank(std::size_t classes, std::size_t bands, const ArchConfig& arch, bool mixture,
                  std::vector<ClassDomain> domains, Rng& rng);
    GeneratorBank(std::size_t classes, std::size_t bands, std::size_t noise_dim, bool mixture,
                  std::vector<nn::Sequential> networks, std::vector<ClassDomain> domains);

    /// Samples for a single class: z [B, noise_dim] -> [B, bands].
    Tensor generate(const Tensor& z, std::uint32_t cls, Mode mode = Mode::Train) const;
    /// Pre-projection network output (tanh range) for a single class.
    Tensor raw(const Tensor& z, std::uint32_t cls, Mode mode = Mode::Train) const;
    /// Rows of z paired with labels; output row i is conditioned on labels[i].
    Tensor generate_batch(const Tensor& z, std::span<const std::uint32_t> labels, Mode mode = Mode::Train) const;

    bool mixture() const { return mixture_; }
    std::size_t classes() const { return classes_; }
    std::size_t bands() const { return bands_; }
    std::size_t noise_dim() const { return noise_dim_; }
    const std::vector<ClassDomain>& domains() const { return domains_; }
    const std::vector<nn::Sequential>& networks() const { return networks_; }
    /// Network serving class `cls`.
    const nn::Sequential& network_for(std::uint32_t cls) const;
    std::vector<Tensor> parameters() const;
    void set_trainable(bool on) const;

private:
    void check_class(std::uint32_t cls) const;

    std::size_t classes_ = 0;
    std::size_t bands_ = 0;
    std::size_t noise_dim_ = 0;
    bool mixture_ = true;
    std::vector<nn::Sequential> networks_;
    std::vector<ClassDomain> domains_;
};

/// Conv stack -> dense. With one output it ends in a sigmoid (probability of
/// "real"); with N+1 outputs it returns softmax probabilities whose last
/// entry is the "generated" class.
class Discriminator {
public:
    Discriminator() = default;
    Discriminator(std::size_t bands, std::size_t outputs, const ArchConfig& arch, Rng& rng);
    Discriminator(std::size_t bands, nn::Sequential network);

    /// x [B, bands] -> [B] (one output) or [B, outputs].
    Tensor forward(const Tensor& x, Mode mode = Mode::Train) const;
    std::size_t outputs() const { return outputs_; }
    std::size_t bands() const { return bands_; }
    nn::Sequential& network() { return network_; }
    const nn::Sequential& network() const { return network_; }
    std::vector<Tensor> parameters() const { return network_.parameters(); }
    void set_trainable(bool on) const { network_.set_trainable(on); }

private:
    std::size_t bands_ = 0;
    std::size_t outputs_ = 1;
    nn::Sequential network_;
};

/// Parallel conv branches with distinct kernel sizes over the same input,
/// concatenated and mapped to N-way softmax.
class Classifier {
public:
    Classifier() = default;
    Classifier(std::size_t bands, std::size_t classes, const ArchConfig& arch, Rng& rng);
    Classifier(std::size_t bands, std::size_t classes, std::vector<nn::Sequential> branches, nn::Sequential head);

    Tensor logits(const Tensor& x, Mode mode = Mode::Train) const;
    /// x [B, bands] -> [B, classes], rows sum to 1.
    Tensor forward(const Tensor& x, Mode mode = Mode::Train) const;
    std::size_t classes() const { return classes_; }
    std::size_t bands() const { return bands_; }
    const std::vector<nn::Sequential>& branches() const { return branches_; }
    const nn::Sequential& head() const { return head_; }
    nn::Sequential& head() { return head_; }
    std::vector<Tensor> parameters() const;
    void set_trainable(bool on) const;

private:
    std::size_t bands_ = 0;
    std::size_t classes_ = 0;
    std::vector<nn::Sequential> branches_;
    nn::Sequential head_;
};

/// Everything a trained game produces.
struct GanModels {
    GameMode mode = GameMode::Mgsgan;
    std::size_t classes = 0;
    std::size_t bands = 0;
    std::size_t noise_dim = 100;
    GeneratorBank generators;
    Discriminator discriminator;
    std::optional<Classifier> classifier;

    /// Class probabilities [B, classes] from whichever player classifies in
    /// this mode (C, or D's first N outputs renormalized for achsgan).
    Tensor class_probabilities(const Tensor& x) const;
    /// Argmax predictions over a dataset, in eval mode, in chunks.
    std::vector<std::uint32_t> predict(const data::SpectralDataset& ds) const;
};

GanModels build_models(GameMode mode, std::size_t classes, std::size_t bands, const ArchConfig& arch,
                       std::vector<ClassDomain> domains, Rng& rng);

/// [B, classes] one-hot rows.
Tensor one_hot(std::span<const std::uint32_t> labels, std::size_t classes);

// ---- checkpoint ------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const GanModels& models);
GanModels decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const GanModels& models, const std::filesystem::path& path);
GanModels load_checkpoint(const std::filesystem::path& path);

}  // namespace mgsgan::models
