#include "mgsgan/cli.hpp"

#include "binary_io.hpp"
#include "mgsgan/data.hpp"
#include "mgsgan/errors.hpp"
#include "mgsgan/eval.hpp"
#include "mgsgan/models.hpp"
#include "mgsgan/train.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace mgsgan::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("short write to " + path.string());
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// key=value lines; '#' comments and [section] headers are ignored. A key
// fills the matching --key option of `cmd` unless it was given on the
// command line.
void apply_config_file(CLI::App& cmd, const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(path.string() + ": expected key=value", line_no);
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
        CLI::Option* opt = nullptr;
        try {
            opt = cmd.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw ParseError(path.string() + ": unknown key '" + key + "'", line_no);
        }
        if (opt->count() > 0) continue;
        bool excluded = false;
        for (const CLI::Option* other : opt->get_excludes()) excluded = excluded || other->count() > 0;
        if (excluded) continue;
        if (opt->get_expected_max() == 0) {
            if (value == "true" || value == "1") {
                opt->add_result(std::string("true"));
                opt->run_callback();
            }
            continue;
        }
        opt->add_result(value);
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ParseError(path.string() + ": bad value for '" + key + "': " + e.what(), line_no);
        }
    }
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        if constexpr (std::is_floating_point_v<T>) {
            out += fmt::format("{}", v[i]);
        } else {
            out += std::to_string(v[i]);
        }
    }
    return out;
}

// ---- synth -----------------------------------------------------------------------

struct SynthArgs {
    data::SyntheticSpec spec;
    std::string out;
    std::string format;
};

void add_synth(CLI::App& app, SynthArgs& a) {
    auto* cmd = app.add_subcommand("synth", "Write a seeded synthetic imbalanced dataset");
    cmd->add_option("--classes", a.spec.classes, "Number of classes")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--bands", a.spec.bands, "Bands per spectrum")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--sizes", a.spec.sizes, "Per-class sample counts, comma separated")->required()->delimiter(',');
    cmd->add_option("--seed", a.spec.seed, "Random seed")->capture_default_str();
    cmd->add_option("--overlap", a.spec.overlap, "Pull the smallest class toward the largest, in [0,1]")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--noise", a.spec.noise, "White-noise standard deviation")->capture_default_str();
    cmd->add_option("--out", a.out, "Output file")->required();
    cmd->add_option("--format", a.format, "csv or bin (default: from the extension)")
        ->check(CLI::IsMember({"csv", "bin"}));
}

int cmd_synth(const SynthArgs& a) {
    if (a.spec.sizes.size() != a.spec.classes) {
        throw UsageError(fmt::format("--sizes lists {} classes but --classes is {}", a.spec.sizes.size(),
                                     a.spec.classes));
    }
    for (auto s : a.spec.sizes) {
        if (s < 2) throw UsageError("every class needs at least 2 samples");
    }
    const auto ds = data::make_synthetic(a.spec);
    const auto format = a.format.empty() ? data::format_from_path(a.out) : data::parse_format(a.format);
    data::save_dataset(ds, a.out, format);
    spdlog::info("wrote {} samples ({} classes, {} bands) to {}", ds.size(), ds.classes, ds.bands, a.out);
    return kOk;
}

// ---- train -----------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config;
    std::string mode = "mgsgan";
    double tttr = 0.1;
    std::vector<std::uint64_t> seeds{0};
    std::string priors = "empirical";
    std::string gen_loss = "non-saturating";
    std::string noise_dist = "normal";
    std::vector<std::size_t> gen_channels{32, 16};
    std::vector<std::size_t> disc_channels{16, 32};
    std::vector<std::size_t> cls_channels{8, 16};
    std::vector<std::size_t> cls_kernels{3, 5, 7};
    bool no_augment = false;
    std::size_t jobs = 1;
    train::TrainConfig cfg;
    CLI::App* cmd = nullptr;
};

void add_train(CLI::App& app, TrainArgs& a) {
    auto* cmd = app.add_subcommand("train", "Train the game on a dataset for one or more seeds");
    a.cmd = cmd;
    auto& c = a.cfg;
    cmd->add_option("--data", a.data, "Dataset file (csv or bin)");
    cmd->add_option("--out", a.out, "Output directory")->required();
    cmd->add_option("--config", a.config, "key=value file; flags on the command line win");
    cmd->add_option("--mode", a.mode, "mgsgan, acsgan or achsgan")
        ->check(CLI::IsMember({"mgsgan", "acsgan", "achsgan"}))
        ->capture_default_str();
    cmd->add_option("--tttr", a.tttr, "Training fraction per class")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    cmd->add_option("--epochs", c.epochs)->capture_default_str();
    auto* seed = cmd->add_option("--seed", a.seeds, "Single seed")->expected(1);
    auto* seeds = cmd->add_option("--seeds", a.seeds, "Comma-separated seeds")->delimiter(',');
    seed->excludes(seeds);
    cmd->add_option("--batch", c.batch)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--lr", c.lr)->capture_default_str();
    cmd->add_option("--beta1", c.beta1)->capture_default_str();
    cmd->add_option("--beta2", c.beta2)->capture_default_str();
    cmd->add_option("--margin", c.margin, "Domain box margin as a fraction of each band's range")->capture_default_str();
    cmd->add_option("--priors", a.priors, "empirical or uniform")
        ->check(CLI::IsMember({"empirical", "uniform"}))
        ->capture_default_str();
    cmd->add_option("--gen-loss", a.gen_loss, "non-saturating or saturating")
        ->check(CLI::IsMember({"non-saturating", "saturating"}))
        ->capture_default_str();
    cmd->add_option("--noise-dist", a.noise_dist, "normal, uniform or normal-mean-minus-one")
        ->check(CLI::IsMember({"normal", "uniform", "normal-mean-minus-one"}))
        ->capture_default_str();
    cmd->add_option("--noise-dim", c.arch.noise_dim)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--gen-channels", a.gen_channels)->delimiter(',')->expected(2)->capture_default_str();
    cmd->add_option("--disc-channels", a.disc_channels)->delimiter(',')->expected(2)->capture_default_str();
    cmd->add_option("--cls-channels", a.cls_channels)->delimiter(',')->expected(2)->capture_default_str();
    cmd->add_option("--cls-kernels", a.cls_kernels)->delimiter(',')->capture_default_str();
    cmd->add_flag("--no-augment", a.no_augment, "Train C on real samples only");
    cmd->add_option("--probe-samples", c.probe_samples, "Per-class samples for containment telemetry")
        ->capture_default_str();
    cmd->add_option("--checkpoint-every", c.checkpoint_every, "Write epoch checkpoints every k epochs (0: off)")
        ->capture_default_str();
    cmd->add_option("--jobs", a.jobs, "Seeds trained concurrently")->check(CLI::PositiveNumber)->capture_default_str();
}

void finish_train_config(TrainArgs& a) {
    if (!a.config.empty()) apply_config_file(*a.cmd, a.config);
    if (a.data.empty()) throw UsageError("--data is required (flag or config key)");
    if (a.seeds.empty()) throw UsageError("no seeds given");
    if (!(a.tttr > 0.0 && a.tttr < 1.0)) throw UsageError("--tttr must lie in (0, 1)");
    auto& c = a.cfg;
    c.mode = models::parse_game_mode(a.mode);
    c.priors = train::parse_prior_mode(a.priors);
    c.gen_loss = train::parse_generator_loss(a.gen_loss);
    c.noise = train::parse_noise_dist(a.noise_dist);
    c.augment = !a.no_augment;
    c.arch.gen_channels_first = a.gen_channels.at(0);
    c.arch.gen_channels_second = a.gen_channels.at(1);
    c.arch.disc_channels_first = a.disc_channels.at(0);
    c.arch.disc_channels_second = a.disc_channels.at(1);
    c.arch.cls_channels_first = a.cls_channels.at(0);
    c.arch.cls_channels_second = a.cls_channels.at(1);
    if (a.cls_kernels.empty()) throw UsageError("--cls-kernels needs at least one kernel");
    c.arch.cls_kernels = a.cls_kernels;
}

std::string train_snapshot(const TrainArgs& a) {
    const auto& c = a.cfg;
    std::string s;
    const auto kv = [&s](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
    kv("data", a.data);
    kv("mode", a.mode);
    kv("tttr", fmt::format("{}", a.tttr));
    kv("seeds", join(a.seeds));
    kv("epochs", std::to_string(c.epochs));
    kv("batch", std::to_string(c.batch));
    kv("lr", fmt::format("{}", c.lr));
    kv("beta1", fmt::format("{}", c.beta1));
    kv("beta2", fmt::format("{}", c.beta2));
    kv("margin", fmt::format("{}", c.margin));
    kv("priors", a.priors);
    kv("gen-loss", a.gen_loss);
    kv("noise-dist", a.noise_dist);
    kv("noise-dim", std::to_string(c.arch.noise_dim));
    kv("gen-channels", join(a.gen_channels));
    kv("disc-channels", join(a.disc_channels));
    kv("cls-channels", join(a.cls_channels));
    kv("cls-kernels", join(a.cls_kernels));
    kv("no-augment", a.no_augment ? "true" : "false");
    kv("probe-samples", std::to_string(c.probe_samples));
    kv("checkpoint-every", std::to_string(c.checkpoint_every));
    return s;
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    json entry;
    int code = kOk;
    std::string error;
};

SeedOutcome train_one_seed(const TrainArgs& a, const data::SpectralDataset& ds, std::uint64_t seed,
                           const fs::path& out_dir) {
    SeedOutcome outcome;
    outcome.seed = seed;
    const std::string rel = "seed_" + std::to_string(seed);
    const fs::path dir = out_dir / rel;
    fs::create_directories(dir);

    auto [train_raw, test_raw] = data::split_tttr(ds, {a.tttr, seed, true});
    const auto norm = data::Normalization::fit(train_raw.samples, train_raw.bands);
    const auto train_ds = data::normalize(train_raw, norm);
    const auto test_ds = data::normalize(test_raw, norm);
    data::save_dataset(train_ds, dir / "train.bin", data::Format::Bin);
    data::save_dataset(test_ds, dir / "test.bin", data::Format::Bin);

    train::TrainConfig cfg = a.cfg;
    cfg.seed = seed;
    if (cfg.batch > train_ds.size()) {
        spdlog::warn("seed {}: batch {} exceeds {} training samples; using {}", seed, cfg.batch, train_ds.size(),
                     train_ds.size());
        cfg.batch = train_ds.size();
    }
    train::TrainHooks hooks;
    std::vector<std::string> epoch_ckpts;
    hooks.on_checkpoint = [&](std::size_t epoch, const models::GanModels& m) {
        const std::string name = fmt::format("epoch_{:05d}.ckpt", epoch);
        models::save_checkpoint(m, dir / name);
        epoch_ckpts.push_back(rel + "/" + name);
    };

    json entry;
    entry["seed"] = seed;
    entry["dir"] = rel;
    entry["train"] = rel + "/train.bin";
    entry["test"] = rel + "/test.bin";
    try {
        auto result = train::train(train_ds, cfg, hooks);
        models::save_checkpoint(result.models, dir / "model.ckpt");
        write_text(dir / "runlog.jsonl", result.log.to_jsonl());
        write_text(dir / "timing.jsonl", result.log.timing_jsonl());
        entry["checkpoint"] = rel + "/model.ckpt";
        entry["runlog"] = rel + "/runlog.jsonl";
        entry["timing"] = rel + "/timing.jsonl";
        entry["epochs"] = result.log.epochs.size();
        entry["epoch_checkpoints"] = epoch_ckpts;
        entry["status"] = "ok";
    } catch (const train::TrainingAborted& e) {
        io::write_file(dir / "last_good.ckpt", e.last_good_checkpoint());
        spdlog::error("seed {}: training aborted: {}; last good checkpoint at {}", seed, e.what(),
                      (dir / "last_good.ckpt").string());
        entry["status"] = "aborted";
        entry["error"] = e.what();
        entry["last_good"] = rel + "/last_good.ckpt";
        outcome.code = kNumericError;
        outcome.error = e.what();
    }
    outcome.entry = std::move(entry);
    return outcome;
}

int cmd_train(TrainArgs& a) {
    finish_train_config(a);
    const auto ds = data::load_dataset(a.data);
    ds.validate(true);
    const fs::path out_dir = a.out;
    fs::create_directories(out_dir);
    write_text(out_dir / "config.ini", train_snapshot(a));

    std::vector<SeedOutcome> outcomes(a.seeds.size());
    std::exception_ptr failure;
    std::mutex mu;
    std::size_t next = 0;
    const auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next >= a.seeds.size() || failure) return;
                i = next++;
            }
            try {
                outcomes[i] = train_one_seed(a, ds, a.seeds[i], out_dir);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(a.jobs, a.seeds.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    json manifest;
    manifest["command"] = "train";
    manifest["mode"] = a.mode;
    manifest["config"] = "config.ini";
    manifest["dataset"] = {{"path", a.data},
                           {"fnv1a", hex64(data::fnv1a(io::read_file(a.data)))},
                           {"samples", ds.size()},
                           {"classes", ds.classes},
                           {"bands", ds.bands}};
    manifest["seeds"] = a.seeds;
    manifest["output_dir"] = a.out;
    auto runs = json::array();
    int code = kOk;
    for (const auto& o : outcomes) {
        runs.push_back(o.entry);
        code = std::max(code, o.code);
    }
    manifest["runs"] = std::move(runs);
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    spdlog::info("wrote {}", (out_dir / "manifest.json").string());
    return code;
}

// ---- eval ------------------------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> checkpoints;
    std::vector<std::string> tests;
    std::string run;
    std::vector<std::string> compare;
    std::string label;
    std::string compare_label;
    std::string out;
    std::size_t mcnemar_run = 0;
    bool continuity = false;
};

void add_eval(CLI::App& app, EvalArgs& a) {
    auto* cmd = app.add_subcommand("eval", "Score checkpoints on their test splits");
    auto* ck = cmd->add_option("--checkpoint", a.checkpoints, "Checkpoint file (repeat for several seeds)");
    cmd->add_option("--test", a.tests, "Test split for each --checkpoint (one file is shared by all)");
    auto* run = cmd->add_option("--run", a.run, "Training output directory (reads manifest.json)");
    ck->excludes(run);
    cmd->add_option("--compare", a.compare, "Second model: a run directory, or checkpoints aligned with --checkpoint");
    cmd->add_option("--label", a.label, "Column label of the primary model");
    cmd->add_option("--compare-label", a.compare_label, "Column label of the compared model");
    cmd->add_option("--out", a.out, "Write the JSON report here and the table next to it (.txt)");
    cmd->add_option("--mcnemar-run", a.mcnemar_run, "Index of the seed whose test split McNemar uses")
        ->capture_default_str();
    cmd->add_flag("--continuity-correction", a.continuity, "Continuity-corrected McNemar statistic");
}

struct LoadedRun {
    std::uint64_t seed = 0;
    models::GanModels models;
    data::SpectralDataset test;
};

std::vector<LoadedRun> load_run_dir(const fs::path& dir) {
    const auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
    std::vector<LoadedRun> out;
    for (const auto& r : manifest.at("runs")) {
        if (r.value("status", "ok") != "ok") {
            throw DataError("run for seed " + std::to_string(r.at("seed").get<std::uint64_t>()) + " in " +
                            dir.string() + " did not finish");
        }
        LoadedRun lr;
        lr.seed = r.at("seed").get<std::uint64_t>();
        lr.models = models::load_checkpoint(dir / r.at("checkpoint").get<std::string>());
        lr.test = data::load_dataset(dir / r.at("test").get<std::string>());
        out.push_back(std::move(lr));
    }
    if (out.empty()) throw DataError(dir.string() + ": manifest lists no runs");
    return out;
}

std::vector<LoadedRun> load_checkpoints(const std::vector<std::string>& ckpts, const std::vector<std::string>& tests) {
    if (tests.size() != 1 && tests.size() != ckpts.size()) {
        throw UsageError("give one --test per --checkpoint, or a single shared --test");
    }
    std::vector<LoadedRun> out;
    for (std::size_t i = 0; i < ckpts.size(); ++i) {
        LoadedRun lr;
        lr.seed = i;
        lr.models = models::load_checkpoint(ckpts[i]);
        lr.test = data::load_dataset(tests.size() == 1 ? tests[0] : tests[i]);
        out.push_back(std::move(lr));
    }
    return out;
}

std::vector<std::uint32_t> predict_checked(const LoadedRun& r) {
    if (r.models.bands != r.test.bands || r.models.classes != r.test.classes) {
        throw DataError(fmt::format("incompatible checkpoint and data: model has N={} d={}, data has N={} d={}",
                                    r.models.classes, r.models.bands, r.test.classes, r.test.bands));
    }
    return r.models.predict(r.test);
}

eval::EvalReport score(const std::vector<LoadedRun>& runs, const std::string& label,
                       std::vector<std::vector<std::uint32_t>>& predictions) {
    eval::EvalReport rep;
    rep.label = label;
    rep.classes = runs.front().models.classes;
    for (const auto& r : runs) {
        predictions.push_back(predict_checked(r));
        rep.runs.push_back(eval::compute_metrics(r.test.labels, predictions.back(), rep.classes, r.seed));
    }
    return rep;
}

int cmd_eval(const EvalArgs& a) {
    std::vector<LoadedRun> primary;
    std::string label = a.label;
    if (!a.run.empty()) {
        primary = load_run_dir(a.run);
        if (label.empty()) label = fs::path(a.run).filename().string();
    } else if (!a.checkpoints.empty()) {
        primary = load_checkpoints(a.checkpoints, a.tests);
        if (label.empty()) label = models::to_string(primary.front().models.mode);
    } else {
        throw UsageError("eval needs --run or --checkpoint/--test");
    }
    if (label.empty()) label = "model";

    eval::Comparison cmp;
    std::vector<std::vector<std::uint32_t>> preds_a, preds_b;
    cmp.reports.push_back(score(primary, label, preds_a));

    if (!a.compare.empty()) {
        std::vector<LoadedRun> other;
        if (a.compare.size() == 1 && fs::is_directory(a.compare[0])) {
            other = load_run_dir(a.compare[0]);
        } else {
            other = load_checkpoints(a.compare, a.run.empty() ? a.tests : std::vector<std::string>{});
        }
        std::string other_label = a.compare_label;
        if (other_label.empty()) other_label = fs::path(a.compare[0]).filename().string();
        if (other_label == label) other_label += " (compare)";
        cmp.reports.push_back(score(other, other_label, preds_b));
        const std::size_t k = a.mcnemar_run;
        if (k >= primary.size() || k >= other.size()) throw UsageError("--mcnemar-run out of range");
        if (primary[k].test.labels != other[k].test.labels || primary[k].test.samples != other[k].test.samples) {
            throw DataError("McNemar needs both models scored on the same test split");
        }
        cmp.mcnemar = eval::mcnemar(preds_a[k], preds_b[k], primary[k].test.labels, a.continuity);
        cmp.mcnemar_seed = primary[k].seed;
    }

    const std::string table = cmp.to_table();
    std::fputs(table.c_str(), stdout);
    if (!a.out.empty()) {
        write_text(a.out, cmp.to_json());
        fs::path txt = a.out;
        txt.replace_extension(".txt");
        write_text(txt, table);
        spdlog::info("wrote {} and {}", a.out, txt.string());
    }
    return kOk;
}

// ---- export-spectra ------------------------------------------------------------------

struct ExportArgs {
    std::string checkpoint;
    std::string train;
    std::size_t samples = 256;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> classes;
    std::string out;
    std::string noise_dist = "normal";
    bool denormalize = false;
};

void add_export(CLI::App& app, ExportArgs& a) {
    auto* cmd = app.add_subcommand("export-spectra", "Per-class mean real vs generated spectra as CSV");
    cmd->add_option("--checkpoint", a.checkpoint)->required();
    cmd->add_option("--train", a.train, "Training split the checkpoint was fitted on")->required();
    cmd->add_option("--samples", a.samples, "Generated samples per class")->capture_default_str();
    cmd->add_option("--seed", a.seed)->capture_default_str();
    cmd->add_option("--class", a.classes, "Restrict to these classes (comma separated)")->delimiter(',');
    cmd->add_option("--out", a.out, "Output CSV")->required();
    cmd->add_option("--noise-dist", a.noise_dist)
        ->check(CLI::IsMember({"normal", "uniform", "normal-mean-minus-one"}))
        ->capture_default_str();
    cmd->add_flag("--denormalize", a.denormalize, "Report values in the original band units");
}

int cmd_export(const ExportArgs& a) {
    if (a.samples == 0) throw UsageError("--samples must be >= 1");
    const auto m = models::load_checkpoint(a.checkpoint);
    const auto train_ds = data::load_dataset(a.train);
    if (m.bands != train_ds.bands || m.classes != train_ds.classes) {
        throw DataError("incompatible checkpoint and training split");
    }
    std::vector<std::uint32_t> classes = a.classes;
    if (classes.empty()) {
        for (std::uint32_t c = 0; c < m.classes; ++c) classes.push_back(c);
    }
    for (auto c : classes) {
        if (c >= m.classes) {
            throw ContractError("unknown class id " + std::to_string(c) + " (model has " + std::to_string(m.classes) +
                                " classes)");
        }
    }
    const auto& domains = m.generators.domains();
    if (domains.size() != m.classes) throw DataError("checkpoint carries no domain boxes");
    if (a.denormalize && !train_ds.normalization) throw DataError("--denormalize needs a split with a normalization record");
    const auto to_units = [&](std::size_t band, double v) {
        return a.denormalize ? train_ds.normalization->invert(band, v) : v;
    };

    nn::Rng rng(train::derive_seed(a.seed, 7));
    const auto dist = train::parse_noise_dist(a.noise_dist);
    std::string csv = "class,band,real_mean,generated_mean,box_lower,box_upper,containment\n";
    for (auto c : classes) {
        const auto idx = train_ds.indices_of(c);
        std::vector<double> real_mean(m.bands, 0.0), gen_mean(m.bands, 0.0);
        for (auto i : idx) {
            const auto r = train_ds.row(i);
            for (std::size_t b = 0; b < m.bands; ++b) real_mean[b] += r[b];
        }
        for (auto& v : real_mean) v /= static_cast<double>(std::max<std::size_t>(idx.size(), 1));
        const auto z = train::sample_noise(a.samples, m.noise_dim, dist, rng);
        const auto x = m.generators.generate(z, c, nn::Mode::Eval);
        std::size_t inside = 0;
        for (std::size_t s = 0; s < a.samples; ++s) {
            const auto row = x.values().subspan(s * m.bands, m.bands);
            inside += domains[c].contains(row) ? 1 : 0;
            for (std::size_t b = 0; b < m.bands; ++b) gen_mean[b] += row[b];
        }
        for (auto& v : gen_mean) v /= static_cast<double>(a.samples);
        const double rate = static_cast<double>(inside) / static_cast<double>(a.samples);
        for (std::size_t b = 0; b < m.bands; ++b) {
            csv += fmt::format("{},{},{},{},{},{},{}\n", c, b, to_units(b, real_mean[b]), to_units(b, gen_mean[b]),
                               to_units(b, domains[c].lower[b]), to_units(b, domains[c].upper[b]), rate);
        }
        fmt::print("class {}: {} real, {} generated, containment {:.4f}\n", c, idx.size(), a.samples, rate);
    }
    write_text(a.out, csv);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Mixture-of-generators spectral GAN: synthesize data, train, evaluate"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
        ->capture_default_str();

    SynthArgs synth;
    TrainArgs train_args;
    EvalArgs eval_args;
    ExportArgs export_args;
    add_synth(app, synth);
    add_train(app, train_args);
    add_eval(app, eval_args);
    add_export(app, export_args);

    std::vector<const char*> argv{"mgsgan"};
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (app.got_subcommand("synth")) return cmd_synth(synth);
        if (app.got_subcommand("train")) return cmd_train(train_args);
        if (app.got_subcommand("eval")) return cmd_eval(eval_args);
        return cmd_export(export_args);
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return kUsage;
    } catch (const ContractError& e) {
        spdlog::error("{}", e.what());
        return kUsage;
    } catch (const DataError& e) {
        spdlog::error("{}", e.what());
        return kDataError;
    } catch (const DimensionError& e) {
        spdlog::error("{}", e.what());
        return kDataError;
    } catch (const NumericError& e) {
        spdlog::error("{}", e.what());
        return kNumericError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kDataError;
    }
}

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("mgsgan"));
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args);
}

}  // namespace mgsgan::cli
