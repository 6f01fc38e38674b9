#pragma once

#include "mgsgan/errors.hpp"
#include "mgsgan/losses.hpp"
#include "mgsgan/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mgsgan::train {

enum class NoiseDist { Normal, Uniform, NormalMeanMinusOne };

std::string to_string(NoiseDist dist);
NoiseDist parse_noise_dist(const std::string& name);
std::string to_string(losses::PriorMode mode);
losses::PriorMode parse_prior_mode(const std::string& name);
std::string to_string(losses::GeneratorLoss kind);
losses::GeneratorLoss parse_generator_loss(const std::string& name);

struct TrainConfig {
    models::GameMode mode = models::GameMode::Mgsgan;
    std::size_t epochs = 1500;
    std::size_t batch = 64;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::uint64_t seed = 0;
    /// Domain boxes are widened by margin * (max - min) per band.
    double margin = 0.05;
    losses::PriorMode priors = losses::PriorMode::Empirical;
    losses::GeneratorLoss gen_loss = losses::GeneratorLoss::NonSaturating;
    NoiseDist noise = NoiseDist::Normal;
    /// C also trains on labeled fakes.
    bool augment = true;
    /// Per-class generated samples checked against the domain boxes after
    /// each epoch.
    std::size_t probe_samples = 32;
    std::size_t checkpoint_every = 0;
    models::ArchConfig arch;

    /// Throws ContractError on a non-positive field or a batch larger than
    /// the training set.
    void validate(std::size_t train_size) const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    std::optional<double> loss_c;
    /// Mean probability of "real" D assigned to real / generated samples.
    double d_real = 0.0;
    double d_fake = 0.0;
    /// Fraction of probe samples inside their class box, per class.
    std::vector<std::optional<double>> containment;
    /// FNV-1a of the epoch's sample order and fake labels.
    std::uint64_t order_hash = 0;
    double seconds = 0.0;
};

struct RunLog {
    std::vector<EpochRecord> epochs;

    /// One JSON object per line. Wall-clock time is left out so identical
    /// runs serialize identically; see timing_jsonl.
    std::string to_jsonl() const;
    std::string timing_jsonl() const;
    static RunLog from_jsonl(const std::string& text);
};

struct TrainResult {
    models::GanModels models;
    RunLog log;
    losses::ClassPriors priors;
};

/// Thrown when a loss or activation turns non-finite. Carries the last
/// checkpoint that completed an epoch (or the initialization).
class TrainingAborted : public NumericError {
public:
    TrainingAborted(const std::string& what, std::size_t epoch, std::size_t batch, std::vector<std::uint8_t> last_good)
        : NumericError(what), epoch_(epoch), batch_(batch), last_good_(std::move(last_good)) {}

    std::size_t epoch() const { return epoch_; }
    std::size_t batch() const { return batch_; }
    const std::vector<std::uint8_t>& last_good_checkpoint() const { return last_good_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
    std::vector<std::uint8_t> last_good_;
};

struct TrainHooks {
    /// After each epoch's record is complete.
    std::function<void(const EpochRecord&, const models::GanModels&)> on_epoch;
    /// Every config.checkpoint_every epochs.
    std::function<void(std::size_t epoch, const models::GanModels&)> on_checkpoint;
    /// Before each batch's updates (epoch, batch, real sample indices).
    std::function<void(std::size_t, std::size_t, std::span<const std::size_t>)> on_batch;
    /// After each player's update: 'D', 'C' or 'G'.
    std::function<void(char, const models::GanModels&)> on_step;
};

/// Runs the game in config.mode on a normalized training split. Per batch:
/// one D step, one C step (not in achsgan), one G step, each with the other
/// players frozen.
TrainResult train(const data::SpectralDataset& train_ds, const TrainConfig& config, const TrainHooks& hooks = {});

/// Same as train(); the baseline is selected by config.mode.
TrainResult train_baseline(const data::SpectralDataset& train_ds, const TrainConfig& config,
                           const TrainHooks& hooks = {});

/// z for `rows` samples drawn from the configured distribution.
ad::Tensor sample_noise(std::size_t rows, std::size_t dim, NoiseDist dist, nn::Rng& rng);

/// `count` labels drawn from `prior`, sorted ascending.
std::vector<std::uint32_t> sample_labels(std::size_t count, std::span<const double> prior, nn::Rng& rng);

/// Mixes a seed with a stream id into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mgsgan::train
