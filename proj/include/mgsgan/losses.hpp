#pragma once

#include "mgsgan/models.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mgsgan::losses {

using ad::Tensor;

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before every log.
inline constexpr double kProbEps = 1e-7;

/// Class weights for real samples, generated samples and the classifier.
struct ClassPriors {
    std::vector<double> p_real;
    std::vector<double> p_gen;
    std::vector<double> p_cls;

    std::size_t classes() const { return p_real.size(); }
    /// Throws ContractError unless all three are length-N simplex vectors.
    void validate() const;

    static ClassPriors uniform(std::size_t classes);
    /// count_j / total, copied to all three vectors.
    static ClassPriors empirical(std::span<const std::size_t> counts);
};

enum class PriorMode { Empirical, Uniform };
enum class GeneratorLoss { NonSaturating, Saturating };

ClassPriors class_priors(const data::SpectralDataset& train, PriorMode mode = PriorMode::Empirical);

/// Clamp into [kProbEps, 1 - kProbEps]; the first clamp that changes a value
/// after reset_clamp_warning() emits one warning.
Tensor clamp_probability(const Tensor& p);
void reset_clamp_warning();
bool clamp_warning_emitted();

// ---- probability-level losses ---------------------------------------------
// Every loss is mean over the batch of w_{label} * term, where w is the
// label's prior. Empty batches contribute nothing.

/// d_real, d_fake: [B] probabilities of "real".
/// -mean(w_r log d_real) - mean(w_g log(1 - d_fake))
Tensor discriminator_loss(const Tensor& d_real, std::span<const std::uint32_t> real_labels, const Tensor& d_fake,
                          std::span<const std::uint32_t> fake_labels, const ClassPriors& priors);

/// NonSaturating: -mean(w_g log d_fake). Saturating: mean(w_g log(1 - d_fake)).
Tensor generator_loss(const Tensor& d_fake, std::span<const std::uint32_t> fake_labels, const ClassPriors& priors,
                      GeneratorLoss kind = GeneratorLoss::NonSaturating);

/// c_real, c_fake: [B, N] class probabilities. Fake rows are labeled with
/// their conditioning class. c_fake may be a default Tensor (no fake term).
Tensor classifier_loss(const Tensor& c_real, std::span<const std::uint32_t> real_labels, const Tensor& c_fake,
                       std::span<const std::uint32_t> fake_labels, const ClassPriors& priors);

/// Two-player variant where D emits N+1 probabilities, the last meaning
/// "generated". Real rows target their class, fake rows target index N.
Tensor achsgan_discriminator_loss(const Tensor& p_real, std::span<const std::uint32_t> real_labels,
                                  const Tensor& p_fake, std::span<const std::uint32_t> fake_labels,
                                  const ClassPriors& priors);
/// NonSaturating: -mean(w log p_fake[c]). Saturating: mean(w log p_fake[N]).
Tensor achsgan_generator_loss(const Tensor& p_fake, std::span<const std::uint32_t> fake_labels,
                              const ClassPriors& priors, GeneratorLoss kind = GeneratorLoss::NonSaturating);

/// -sum(w_pos log d_pos) - sum(w_neg log(1 - d_neg)) with explicit weights.
/// Used for exact-expectation objectives over a finite support.
Tensor weighted_bce(const Tensor& d_pos, std::span<const double> w_pos, const Tensor& d_neg,
                    std::span<const double> w_neg);

// ---- model-level wrappers --------------------------------------------------

struct LabeledBatch {
    Tensor x;
    std::vector<std::uint32_t> labels;
};

/// Dispatches on the discriminator's output count (1 or N+1).
Tensor loss_D(const models::Discriminator& d, const LabeledBatch& real, const LabeledBatch& fake,
              const ClassPriors& priors);
Tensor loss_G(const models::Discriminator& d, const LabeledBatch& fake, const ClassPriors& priors,
              GeneratorLoss kind = GeneratorLoss::NonSaturating);
/// fake.x may be a default Tensor to train on real samples only.
Tensor loss_C(const models::Classifier& c, const LabeledBatch& real, const LabeledBatch& fake,
              const ClassPriors& priors);

// ---- analytic game over finite supports ------------------------------------

struct DiscreteDistribution {
    std::vector<double> support;
    std::vector<double> mass;

    /// Throws ContractError if sizes differ, mass is negative, or it does
    /// not sum to 1 within 1e-12.
    void validate() const;
};

/// Per-class distributions over one shared support, index = class.
using DistributionFamily = std::vector<DiscreteDistribution>;

/// D*_j(x) = P_j^r p_r(x) / (P_j^r p_r(x) + P_j^g p_g(x)); 0.5 where both vanish.
std::vector<double> optimal_discriminator(const DiscreteDistribution& p_r, const DiscreteDistribution& p_g,
                                          const ClassPriors& priors, std::size_t cls);

/// sum_j sum_x [P_j^r p_r^j(x) log D_j(x) + P_j^g p_g^j(x) log(1 - D_j(x))],
/// with 0 log 0 = 0. d[j][x] is D_j at the x-th support point.
double game_value(const DistributionFamily& p_r, const DistributionFamily& p_g, const ClassPriors& priors,
                  const std::vector<std::vector<double>>& d);

/// Jensen-Shannon divergence (natural log) between two finite measures that
/// each sum to 1.
double jensen_shannon(std::span<const double> p, std::span<const double> q);

/// -2 log 2 + 2 JS(r || g), where r(j, x) = P_j^r p_r^j(x) and
/// g(j, x) = P_j^g p_g^j(x) are the prior-scaled joint measures.
double game_value_at_optimum(const DistributionFamily& p_r, const DistributionFamily& p_g,
                             const ClassPriors& priors);

}  // namespace mgsgan::losses
