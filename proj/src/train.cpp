#include "mgsgan/train.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mgsgan::train {

using ad::Tensor;
using models::GameMode;
using models::GanModels;
using nn::Mode;
using nn::Rng;

std::string to_string(NoiseDist dist) {
    switch (dist) {
        case NoiseDist::Normal: return "normal";
        case NoiseDist::Uniform: return "uniform";
        case NoiseDist::NormalMeanMinusOne: return "normal-mean-minus-one";
    }
    return "unknown";
}

NoiseDist parse_noise_dist(const std::string& name) {
    if (name == "normal") return NoiseDist::Normal;
    if (name == "uniform") return NoiseDist::Uniform;
    if (name == "normal-mean-minus-one") return NoiseDist::NormalMeanMinusOne;
    throw ContractError("unknown noise distribution '" + name + "'");
}

std::string to_string(losses::PriorMode mode) {
    return mode == losses::PriorMode::Empirical ? "empirical" : "uniform";
}

losses::PriorMode parse_prior_mode(const std::string& name) {
    if (name == "empirical") return losses::PriorMode::Empirical;
    if (name == "uniform") return losses::PriorMode::Uniform;
    throw ContractError("unknown prior mode '" + name + "'");
}

std::string to_string(losses::GeneratorLoss kind) {
    return kind == losses::GeneratorLoss::NonSaturating ? "non-saturating" : "saturating";
}

losses::GeneratorLoss parse_generator_loss(const std::string& name) {
    if (name == "non-saturating") return losses::GeneratorLoss::NonSaturating;
    if (name == "saturating") return losses::GeneratorLoss::Saturating;
    throw ContractError("unknown generator loss '" + name + "'");
}

void TrainConfig::validate(std::size_t train_size) const {
    if (batch == 0) throw ContractError("batch must be positive");
    if (batch > train_size) {
        throw ContractError("batch " + std::to_string(batch) + " exceeds training set size " +
                            std::to_string(train_size));
    }
    if (!(lr >= 0.0)) throw ContractError("lr must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("betas must lie in [0, 1)");
    if (!(margin >= 0.0)) throw ContractError("margin must be >= 0");
    if (arch.noise_dim == 0) throw ContractError("noise_dim must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over seed and stream
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Tensor sample_noise(std::size_t rows, std::size_t dim, NoiseDist dist, Rng& rng) {
    std::vector<double> v(rows * dim);
    if (dist == NoiseDist::Uniform) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& x : v) x = u(rng);
    } else {
        std::normal_distribution<double> n(dist == NoiseDist::Normal ? 0.0 : -1.0, 1.0);
        for (auto& x : v) x = n(rng);
    }
    return Tensor::from({rows, dim}, std::move(v));
}

std::vector<std::uint32_t> sample_labels(std::size_t count, std::span<const double> prior, Rng& rng) {
    std::vector<double> cdf(prior.size());
    std::partial_sum(prior.begin(), prior.end(), cdf.begin());
    std::uniform_real_distribution<double> u(0.0, cdf.back());
    std::vector<std::uint32_t> out(count);
    for (auto& c : out) {
        const double r = u(rng);
        auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        if (it == cdf.end()) --it;
        // skip zero-mass classes sitting at the boundary
        while (*it == 0.0 && it + 1 != cdf.end()) ++it;
        c = static_cast<std::uint32_t>(it - cdf.begin());
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

enum class Player { None, D, C, G };

void activate(const GanModels& m, Player p) {
    m.generators.set_trainable(p == Player::G);
    m.discriminator.set_trainable(p == Player::D);
    if (m.classifier) m.classifier->set_trainable(p == Player::C);
}

// Probability of "real" per row.
std::vector<double> real_probability(const Tensor& d_out, std::size_t classes) {
    if (d_out.rank() == 1) return {d_out.values().begin(), d_out.values().end()};
    std::vector<double> out(d_out.dim(0));
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = 1.0 - d_out[r * (classes + 1) + classes];
    return out;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Fnv {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 0x100000001b3ULL;
        }
    }
};

void check_loss(const Tensor& loss, const char* name) {
    if (!std::isfinite(loss.item())) throw NumericError(std::string(name) + " is not finite");
}

Tensor gather_rows(const data::SpectralDataset& ds, std::span<const std::size_t> idx) {
    std::vector<double> v;
    v.reserve(idx.size() * ds.bands);
    for (auto i : idx) {
        const auto r = ds.row(i);
        v.insert(v.end(), r.begin(), r.end());
    }
    return Tensor::from({idx.size(), ds.bands}, std::move(v));
}

}  // namespace

TrainResult train(const data::SpectralDataset& train_ds, const TrainConfig& config, const TrainHooks& hooks) {
    train_ds.validate(true);
    config.validate(train_ds.size());
    losses::reset_clamp_warning();

    const std::size_t n = train_ds.classes, m = train_ds.size();
    const bool has_c = config.mode != GameMode::Achsgan;
    TrainResult result;
    result.priors = losses::class_priors(train_ds, config.priors);
    const auto& priors = result.priors;

    Rng init_rng(derive_seed(config.seed, 1));
    Rng order_rng(derive_seed(config.seed, 2));
    Rng noise_rng(derive_seed(config.seed, 3));
    Rng probe_rng(derive_seed(config.seed, 4));

    result.models = models::build_models(config.mode, n, train_ds.bands, config.arch,
                                         models::compute_class_domains(train_ds, config.margin), init_rng);
    GanModels& gm = result.models;

    const nn::AdamConfig adam{config.lr, config.beta1, config.beta2, 1e-8};
    nn::Adam opt_d(gm.discriminator.parameters(), adam);
    std::optional<nn::Adam> opt_c;
    if (has_c) opt_c.emplace(gm.classifier->parameters(), adam);
    std::vector<nn::Adam> opt_g;
    for (const auto& net : gm.generators.networks()) opt_g.emplace_back(net.parameters(), adam);

    std::vector<std::uint8_t> last_good = models::encode_checkpoint(gm);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batches = (m + config.batch - 1) / config.batch;
    spdlog::info("training {} on {} samples, {} classes, {} bands: {} epochs x {} batches", to_string(config.mode), m,
                 n, train_ds.bands, config.epochs, batches);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), order_rng);
        Fnv trace;
        for (auto i : order) trace.add(i);
        double sum_d = 0, sum_g = 0, sum_c = 0;
        std::vector<double> d_real_all, d_fake_all;

        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * config.batch, end = std::min(m, begin + config.batch);
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            if (hooks.on_batch) hooks.on_batch(epoch, b, idx);
            const Tensor real_x = gather_rows(train_ds, idx);
            std::vector<std::uint32_t> real_y;
            real_y.reserve(idx.size());
            for (auto i : idx) real_y.push_back(train_ds.labels[i]);
            const auto fake_y = sample_labels(idx.size(), priors.p_gen, noise_rng);
            for (auto c : fake_y) trace.add(c);
            const Tensor z = sample_noise(idx.size(), gm.noise_dim, config.noise, noise_rng);

            try {
                // D step
                activate(gm, Player::D);
                const Tensor fake_x = gm.generators.generate_batch(z, fake_y).detach();
                const Tensor pr = gm.discriminator.forward(real_x);
                const Tensor pf = gm.discriminator.forward(fake_x);
                const Tensor loss_d = has_c ? losses::discriminator_loss(pr, real_y, pf, fake_y, priors)
                                            : losses::achsgan_discriminator_loss(pr, real_y, pf, fake_y, priors);
                check_loss(loss_d, "discriminator loss");
                ad::backward(loss_d);
                opt_d.step();
                opt_d.zero_grad();
                sum_d += loss_d.item();
                for (double v : real_probability(pr, n)) d_real_all.push_back(v);
                for (double v : real_probability(pf, n)) d_fake_all.push_back(v);
                if (hooks.on_step) hooks.on_step('D', gm);

                // C step
                if (has_c) {
                    activate(gm, Player::C);
                    const losses::LabeledBatch real{real_x, real_y};
                    const losses::LabeledBatch fake{config.augment ? fake_x : Tensor(),
                                                    config.augment ? fake_y : std::vector<std::uint32_t>{}};
                    const Tensor loss_c = losses::loss_C(*gm.classifier, real, fake, priors);
                    check_loss(loss_c, "classifier loss");
                    ad::backward(loss_c);
                    opt_c->step();
                    opt_c->zero_grad();
                    sum_c += loss_c.item();
                    if (hooks.on_step) hooks.on_step('C', gm);
                }

                // G step
                activate(gm, Player::G);
                const Tensor gen = gm.generators.generate_batch(z, fake_y);
                const Tensor pg = gm.discriminator.forward(gen);
                const Tensor loss_g = has_c ? losses::generator_loss(pg, fake_y, priors, config.gen_loss)
                                            : losses::achsgan_generator_loss(pg, fake_y, priors, config.gen_loss);
                check_loss(loss_g, "generator loss");
                ad::backward(loss_g);
                for (auto& opt : opt_g) {
                    // Generators whose class was not drawn this batch have no gradient.
                    bool used = false;
                    for (const auto& p : gm.generators.networks()[&opt - opt_g.data()].parameters()) {
                        used = used || p.has_grad();
                    }
                    if (used) opt.step();
                    opt.zero_grad();
                }
                sum_g += loss_g.item();
                if (hooks.on_step) hooks.on_step('G', gm);
            } catch (const TrainingAborted&) {
                throw;
            } catch (const NumericError& e) {
                activate(gm, Player::None);
                throw TrainingAborted(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(b),
                                      epoch, b, last_good);
            }
        }

        activate(gm, Player::None);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_d = sum_d / static_cast<double>(batches);
        rec.loss_g = sum_g / static_cast<double>(batches);
        if (has_c) rec.loss_c = sum_c / static_cast<double>(batches);
        rec.d_real = mean_of(d_real_all);
        rec.d_fake = mean_of(d_fake_all);
        rec.order_hash = trace.h;
        const auto& domains = gm.generators.domains();
        for (std::uint32_t c = 0; c < n; ++c) {
            if (config.probe_samples == 0 || domains.size() != n) {
                rec.containment.emplace_back();
                continue;
            }
            const Tensor zp = sample_noise(config.probe_samples, gm.noise_dim, config.noise, probe_rng);
            const Tensor xp = gm.generators.generate(zp, c, Mode::Eval);
            std::size_t inside = 0;
            for (std::size_t r = 0; r < config.probe_samples; ++r) {
                inside += domains[c].contains(xp.values().subspan(r * gm.bands, gm.bands)) ? 1 : 0;
            }
            rec.containment.emplace_back(static_cast<double>(inside) / static_cast<double>(config.probe_samples));
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        spdlog::debug("epoch {}: L_D={:.5f} L_G={:.5f} D(real)={:.3f} D(fake)={:.3f}", epoch, rec.loss_d, rec.loss_g,
                      rec.d_real, rec.d_fake);
        result.log.epochs.push_back(rec);
        last_good = models::encode_checkpoint(gm);
        if (hooks.on_epoch) hooks.on_epoch(rec, gm);
        if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 && hooks.on_checkpoint) {
            hooks.on_checkpoint(epoch, gm);
        }
    }
    activate(gm, Player::None);
    return result;
}

TrainResult train_baseline(const data::SpectralDataset& train_ds, const TrainConfig& config, const TrainHooks& hooks) {
    return train(train_ds, config, hooks);
}

// ---- RunLog serialization ------------------------------------------------------------

std::string RunLog::to_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["loss_d"] = e.loss_d;
        j["loss_g"] = e.loss_g;
        j["loss_c"] = e.loss_c ? nlohmann::ordered_json(*e.loss_c) : nlohmann::ordered_json(nullptr);
        j["d_real"] = e.d_real;
        j["d_fake"] = e.d_fake;
        auto cont = nlohmann::ordered_json::array();
        for (const auto& c : e.containment) cont.push_back(c ? nlohmann::ordered_json(*c) : nlohmann::ordered_json(nullptr));
        j["containment"] = std::move(cont);
        j["order_hash"] = e.order_hash;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string RunLog::timing_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["seconds"] = e.seconds;
        out += j.dump();
        out += '\n';
    }
    return out;
}

RunLog RunLog::from_jsonl(const std::string& text) {
    RunLog log;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            EpochRecord e;
            e.epoch = j.at("epoch").get<std::size_t>();
            e.loss_d = j.at("loss_d").get<double>();
            e.loss_g = j.at("loss_g").get<double>();
            if (!j.at("loss_c").is_null()) e.loss_c = j.at("loss_c").get<double>();
            e.d_real = j.at("d_real").get<double>();
            e.d_fake = j.at("d_fake").get<double>();
            for (const auto& c : j.at("containment")) {
                e.containment.push_back(c.is_null() ? std::nullopt : std::optional<double>(c.get<double>()));
            }
            e.order_hash = j.at("order_hash").get<std::uint64_t>();
            log.epochs.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("runlog: " + std::string(ex.what()), line_no);
        }
    }
    return log;
}

}  // namespace mgsgan::train
