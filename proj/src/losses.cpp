#include "mgsgan/losses.hpp"

#include "mgsgan/errors.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>
#include <numeric>

namespace mgsgan::losses {

namespace {

thread_local bool clamp_warned = false;

void check_simplex(const std::vector<double>& v, std::size_t n, const char* name) {
    if (v.size() != n) throw ContractError(std::string("priors: ") + name + " has wrong length");
    double total = 0.0;
    for (double p : v) {
        if (!(p >= 0.0)) throw ContractError(std::string("priors: ") + name + " has a negative entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractError(std::string("priors: ") + name + " does not sum to 1");
}

std::vector<double> batch_weights(std::span<const std::uint32_t> labels, const std::vector<double>& prior) {
    std::vector<double> w(labels.size());
    const double inv = 1.0 / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= prior.size()) throw ContractError("loss: label " + std::to_string(labels[i]) + " out of range");
        w[i] = prior[labels[i]] * inv;
    }
    return w;
}

void check_batch(const Tensor& p, std::span<const std::uint32_t> labels, std::size_t rank, const char* what) {
    if (p.rank() != rank || p.dim(0) != labels.size()) {
        throw DimensionError(std::string(what) + ": probabilities " + ad::shape_string(p.shape()) + " for " +
                             std::to_string(labels.size()) + " labels");
    }
}

// -mean(w_label * log p)
Tensor neg_weighted_log(const Tensor& p, std::span<const std::uint32_t> labels, const std::vector<double>& prior) {
    return ad::neg(ad::weighted_sum(ad::log(clamp_probability(p)), batch_weights(labels, prior)));
}

Tensor neg_weighted_log1m(const Tensor& p, std::span<const std::uint32_t> labels, const std::vector<double>& prior) {
    const Tensor q = ad::add_scalar(ad::neg(clamp_probability(p)), 1.0);
    return ad::neg(ad::weighted_sum(ad::log(q), batch_weights(labels, prior)));
}

Tensor pick_labels(const Tensor& p, std::span<const std::uint32_t> labels) {
    std::vector<std::size_t> idx(labels.begin(), labels.end());
    return ad::pick(p, idx);
}

Tensor pick_column(const Tensor& p, std::size_t column) {
    std::vector<std::size_t> idx(p.dim(0), column);
    return ad::pick(p, idx);
}

}  // namespace

void ClassPriors::validate() const {
    const std::size_t n = p_real.size();
    if (n == 0) throw ContractError("priors: no classes");
    check_simplex(p_real, n, "p_real");
    check_simplex(p_gen, n, "p_gen");
    check_simplex(p_cls, n, "p_cls");
}

ClassPriors ClassPriors::uniform(std::size_t classes) {
    if (classes == 0) throw ContractError("priors: no classes");
    std::vector<double> u(classes, 1.0 / static_cast<double>(classes));
    return {u, u, u};
}

ClassPriors ClassPriors::empirical(std::span<const std::size_t> counts) {
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    if (counts.empty() || total == 0.0) throw ContractError("priors: empty training set");
    std::vector<double> p(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) p[j] = static_cast<double>(counts[j]) / total;
    return {p, p, p};
}

ClassPriors class_priors(const data::SpectralDataset& train, PriorMode mode) {
    if (train.size() == 0) throw ContractError("class priors: empty training set");
    if (mode == PriorMode::Uniform) return ClassPriors::uniform(train.classes);
    const auto counts = train.class_counts();
    return ClassPriors::empirical(counts);
}

Tensor clamp_probability(const Tensor& p) {
    if (!clamp_warned) {
        for (double v : p.values()) {
            if (v < kProbEps || v > 1.0 - kProbEps) {
                spdlog::warn("probability {} clamped to [{}, 1-{}] before log", v, kProbEps, kProbEps);
                clamp_warned = true;
                break;
            }
        }
    }
    return ad::clamp(p, kProbEps, 1.0 - kProbEps);
}

void reset_clamp_warning() { clamp_warned = false; }
bool clamp_warning_emitted() { return clamp_warned; }

Tensor discriminator_loss(const Tensor& d_real, std::span<const std::uint32_t> real_labels, const Tensor& d_fake,
                          std::span<const std::uint32_t> fake_labels, const ClassPriors& priors) {
    check_batch(d_real, real_labels, 1, "loss_D real");
    check_batch(d_fake, fake_labels, 1, "loss_D fake");
    if (real_labels.empty() || fake_labels.empty()) throw ContractError("loss_D: empty batch");
    return ad::add(neg_weighted_log(d_real, real_labels, priors.p_real),
                   neg_weighted_log1m(d_fake, fake_labels, priors.p_gen));
}

Tensor generator_loss(const Tensor& d_fake, std::span<const std::uint32_t> fake_labels, const ClassPriors& priors,
                      GeneratorLoss kind) {
    check_batch(d_fake, fake_labels, 1, "loss_G");
    if (fake_labels.empty()) throw ContractError("loss_G: empty batch");
    if (kind == GeneratorLoss::NonSaturating) return neg_weighted_log(d_fake, fake_labels, priors.p_gen);
    return ad::neg(neg_weighted_log1m(d_fake, fake_labels, priors.p_gen));
}

Tensor classifier_loss(const Tensor& c_real, std::span<const std::uint32_t> real_labels, const Tensor& c_fake,
                       std::span<const std::uint32_t> fake_labels, const ClassPriors& priors) {
    check_batch(c_real, real_labels, 2, "loss_C real");
    if (real_labels.empty()) throw ContractError("loss_C: empty batch");
    Tensor loss = neg_weighted_log(pick_labels(c_real, real_labels), real_labels, priors.p_cls);
    if (c_fake.node() && !fake_labels.empty()) {
        check_batch(c_fake, fake_labels, 2, "loss_C fake");
        loss = ad::add(loss, neg_weighted_log(pick_labels(c_fake, fake_labels), fake_labels, priors.p_cls));
    }
    return loss;
}

Tensor achsgan_discriminator_loss(const Tensor& p_real, std::span<const std::uint32_t> real_labels,
                                  const Tensor& p_fake, std::span<const std::uint32_t> fake_labels,
                                  const ClassPriors& priors) {
    check_batch(p_real, real_labels, 2, "loss_D real");
    check_batch(p_fake, fake_labels, 2, "loss_D fake");
    if (real_labels.empty() || fake_labels.empty()) throw ContractError("loss_D: empty batch");
    const std::size_t n = priors.classes();
    if (p_real.dim(1) != n + 1 || p_fake.dim(1) != n + 1) throw DimensionError("loss_D: expected N+1 outputs");
    return ad::add(neg_weighted_log(pick_labels(p_real, real_labels), real_labels, priors.p_real),
                   neg_weighted_log(pick_column(p_fake, n), fake_labels, priors.p_gen));
}

Tensor achsgan_generator_loss(const Tensor& p_fake, std::span<const std::uint32_t> fake_labels,
                              const ClassPriors& priors, GeneratorLoss kind) {
    check_batch(p_fake, fake_labels, 2, "loss_G");
    if (fake_labels.empty()) throw ContractError("loss_G: empty batch");
    const std::size_t n = priors.classes();
    if (p_fake.dim(1) != n + 1) throw DimensionError("loss_G: expected N+1 outputs");
    if (kind == GeneratorLoss::NonSaturating) {
        return neg_weighted_log(pick_labels(p_fake, fake_labels), fake_labels, priors.p_gen);
    }
    return ad::neg(neg_weighted_log(pick_column(p_fake, n), fake_labels, priors.p_gen));
}

Tensor weighted_bce(const Tensor& d_pos, std::span<const double> w_pos, const Tensor& d_neg,
                    std::span<const double> w_neg) {
    if (d_pos.size() != w_pos.size() || d_neg.size() != w_neg.size()) {
        throw DimensionError("weighted_bce: weight count mismatch");
    }
    const Tensor pos = ad::weighted_sum(ad::log(clamp_probability(d_pos)), w_pos);
    const Tensor q = ad::add_scalar(ad::neg(clamp_probability(d_neg)), 1.0);
    const Tensor neg = ad::weighted_sum(ad::log(q), w_neg);
    return ad::neg(ad::add(pos, neg));
}

Tensor loss_D(const models::Discriminator& d, const LabeledBatch& real, const LabeledBatch& fake,
              const ClassPriors& priors) {
    const Tensor pr = d.forward(real.x);
    const Tensor pf = d.forward(fake.x);
    if (d.outputs() == 1) return discriminator_loss(pr, real.labels, pf, fake.labels, priors);
    return achsgan_discriminator_loss(pr, real.labels, pf, fake.labels, priors);
}

Tensor loss_G(const models::Discriminator& d, const LabeledBatch& fake, const ClassPriors& priors,
              GeneratorLoss kind) {
    const Tensor pf = d.forward(fake.x);
    if (d.outputs() == 1) return generator_loss(pf, fake.labels, priors, kind);
    return achsgan_generator_loss(pf, fake.labels, priors, kind);
}

Tensor loss_C(const models::Classifier& c, const LabeledBatch& real, const LabeledBatch& fake,
              const ClassPriors& priors) {
    if (!fake.x.node() || fake.labels.empty()) {
        return classifier_loss(c.forward(real.x), real.labels, Tensor(), {}, priors);
    }
    // One pass over real+fake so batch statistics see both.
    const std::size_t nr = real.labels.size(), nf = fake.labels.size();
    const Tensor probs = c.forward(ad::concat({real.x, fake.x}, 0));
    return classifier_loss(ad::slice_rows(probs, 0, nr), real.labels, ad::slice_rows(probs, nr, nr + nf),
                           fake.labels, priors);
}

// ---- analytic game ---------------------------------------------------------------

void DiscreteDistribution::validate() const {
    if (support.size() != mass.size()) throw ContractError("distribution: support and mass differ in length");
    if (mass.empty()) throw ContractError("distribution: empty support");
    double total = 0.0;
    for (double m : mass) {
        if (!(m >= 0.0)) throw ContractError("distribution: negative mass");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ContractError("distribution: mass does not sum to 1");
}

namespace {

void check_shared(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    a.validate();
    b.validate();
    if (a.support != b.support) throw ContractError("distributions do not share a support");
}

void check_family(const DistributionFamily& p_r, const DistributionFamily& p_g, const ClassPriors& priors) {
    if (p_r.size() != priors.classes() || p_g.size() != priors.classes()) {
        throw ContractError("game: need one distribution per class");
    }
    priors.validate();
    for (std::size_t j = 0; j < p_r.size(); ++j) check_shared(p_r[j], p_g[j]);
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

}  // namespace

std::vector<double> optimal_discriminator(const DiscreteDistribution& p_r, const DiscreteDistribution& p_g,
                                          const ClassPriors& priors, std::size_t cls) {
    check_shared(p_r, p_g);
    if (cls >= priors.classes()) throw ContractError("optimal_discriminator: class out of range");
    const double pr = priors.p_real[cls], pg = priors.p_gen[cls];
    std::vector<double> d(p_r.mass.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double a = pr * p_r.mass[i];
        const double denom = a + pg * p_g.mass[i];
        if (denom == 0.0) {
            spdlog::debug("optimal discriminator: zero density at support point {}, using 0.5", i);
            d[i] = 0.5;
        } else {
            d[i] = a / denom;
        }
    }
    return d;
}

double game_value(const DistributionFamily& p_r, const DistributionFamily& p_g, const ClassPriors& priors,
                  const std::vector<std::vector<double>>& d) {
    check_family(p_r, p_g, priors);
    if (d.size() != p_r.size()) throw ContractError("game_value: need one discriminator per class");
    double v = 0.0;
    for (std::size_t j = 0; j < p_r.size(); ++j) {
        if (d[j].size() != p_r[j].mass.size()) throw ContractError("game_value: discriminator length mismatch");
        for (std::size_t i = 0; i < d[j].size(); ++i) {
            v += xlogy(priors.p_real[j] * p_r[j].mass[i], d[j][i]);
            v += xlogy(priors.p_gen[j] * p_g[j].mass[i], 1.0 - d[j][i]);
        }
    }
    return v;
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ContractError("jensen_shannon: length mismatch");
    double kl_p = 0.0, kl_q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
    }
    return 0.5 * (kl_p + kl_q);
}

double game_value_at_optimum(const DistributionFamily& p_r, const DistributionFamily& p_g,
                             const ClassPriors& priors) {
    check_family(p_r, p_g, priors);
    std::vector<double> r, g;
    for (std::size_t j = 0; j < p_r.size(); ++j) {
        for (std::size_t i = 0; i < p_r[j].mass.size(); ++i) {
            r.push_back(priors.p_real[j] * p_r[j].mass[i]);
            g.push_back(priors.p_gen[j] * p_g[j].mass[i]);
        }
    }
    return -2.0 * std::numbers::ln2 + 2.0 * jensen_shannon(r, g);
}

}  // namespace mgsgan::losses
