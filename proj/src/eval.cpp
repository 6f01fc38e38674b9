#include "mgsgan/eval.hpp"

#include "mgsgan/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgsgan::eval {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : counts_(classes, std::vector<std::uint64_t>(classes, 0)) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::vector<std::uint64_t>> counts) : counts_(std::move(counts)) {
    for (const auto& row : counts_) {
        if (row.size() != counts_.size()) throw DimensionError("confusion matrix must be square");
    }
}

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const std::uint32_t> truth,
                                                  std::span<const std::uint32_t> predicted, std::size_t classes) {
    if (truth.size() != predicted.size()) {
        throw DimensionError("confusion matrix: " + std::to_string(truth.size()) + " labels vs " +
                             std::to_string(predicted.size()) + " predictions");
    }
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
}

void ConfusionMatrix::add(std::uint32_t truth, std::uint32_t predicted, std::uint64_t count) {
    if (truth >= classes() || predicted >= classes()) throw ContractError("confusion matrix: class out of range");
    counts_[truth][predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts_) t += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    const auto& row = counts_.at(truth);
    return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
    std::uint64_t s = 0;
    for (const auto& row : counts_) s += row.at(predicted);
    return s;
}

double overall_accuracy(const ConfusionMatrix& cm) {
    const auto m = cm.total();
    if (m == 0) throw ContractError("overall accuracy of an empty confusion matrix");
    std::uint64_t trace = 0;
    for (std::size_t j = 0; j < cm.classes(); ++j) trace += cm.at(j, j);
    return static_cast<double>(trace) / static_cast<double>(m);
}

double cohen_kappa(const ConfusionMatrix& cm) {
    const double p_o = overall_accuracy(cm);
    const double m = static_cast<double>(cm.total());
    double p_e = 0.0;
    for (std::size_t j = 0; j < cm.classes(); ++j) {
        p_e += static_cast<double>(cm.row_sum(j)) * static_cast<double>(cm.col_sum(j));
    }
    p_e /= m * m;
    if (p_e == 1.0) {
        spdlog::info("kappa undefined (chance agreement is 1); reporting 0");
        return 0.0;
    }
    return (p_o - p_e) / (1.0 - p_e);
}

double class_accuracy(const ConfusionMatrix& cm, std::size_t cls) {
    const auto n = cm.row_sum(cls);
    if (n == 0) throw ContractError("class " + std::to_string(cls) + " has no true samples");
    return static_cast<double>(cm.at(cls, cls)) / static_cast<double>(n);
}

double average_accuracy(const ConfusionMatrix& cm) {
    if (cm.classes() == 0) throw ContractError("average accuracy of an empty confusion matrix");
    double s = 0.0;
    for (std::size_t j = 0; j < cm.classes(); ++j) s += class_accuracy(cm, j);
    return s / static_cast<double>(cm.classes());
}

McNemarResult mcnemar(std::span<const std::uint32_t> preds_a, std::span<const std::uint32_t> preds_b,
                      std::span<const std::uint32_t> truth, bool continuity_correction) {
    if (preds_a.size() != truth.size() || preds_b.size() != truth.size()) {
        throw DimensionError("mcnemar: prediction vectors must align with truth");
    }
    McNemarResult r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool a = preds_a[i] == truth[i], b = preds_b[i] == truth[i];
        if (a && !b) ++r.f12;
        if (!a && b) ++r.f21;
    }
    const std::uint64_t disc = r.f12 + r.f21;
    if (disc == 0) {
        spdlog::info("mcnemar: no discordant pairs; statistic is 0");
        return r;
    }
    double num = static_cast<double>(r.f12) - static_cast<double>(r.f21);
    if (continuity_correction) num = std::copysign(std::max(0.0, std::abs(num) - 1.0), num);
    r.statistic = num / std::sqrt(static_cast<double>(disc));
    r.significant = r.statistic > kMcNemarThreshold;
    return r;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw ContractError("mean_std of no values");
    MeanStd out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

RunMetrics compute_metrics(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> predicted,
                           std::size_t classes, std::uint64_t seed) {
    RunMetrics r;
    r.seed = seed;
    r.confusion = ConfusionMatrix::from_predictions(truth, predicted, classes);
    r.oa = overall_accuracy(r.confusion);
    r.kappa = cohen_kappa(r.confusion);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t j = 0; j < classes; ++j) {
        if (r.confusion.row_sum(j) == 0) {
            r.per_class.emplace_back();
            continue;
        }
        const double acc = class_accuracy(r.confusion, j);
        r.per_class.emplace_back(acc);
        sum += acc;
        ++present;
    }
    r.aa = sum / static_cast<double>(present);
    return r;
}

// ---- reports -------------------------------------------------------------------------

namespace {

template <class F>
MeanStd summarize(const std::vector<RunMetrics>& runs, F field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(field(r));
    return mean_std(v);
}

nlohmann::ordered_json summary_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string percent(const MeanStd& m) { return fmt::format("{:.2f} ± {:.2f}", 100.0 * m.mean, 100.0 * m.std); }

// Display width, counting a UTF-8 multibyte sequence as one column.
std::size_t width(const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
    return w;
}

std::string pad(const std::string& s, std::size_t w, bool right) {
    const std::string fill(w > width(s) ? w - width(s) : 0, ' ');
    return right ? fill + s : s + fill;
}

}  // namespace

std::optional<MeanStd> EvalReport::class_summary(std::size_t cls) const {
    std::vector<double> v;
    for (const auto& r : runs) {
        if (cls < r.per_class.size() && r.per_class[cls]) v.push_back(*r.per_class[cls]);
    }
    if (v.empty()) return std::nullopt;
    return mean_std(v);
}

MeanStd EvalReport::oa() const { return summarize(runs, [](const RunMetrics& r) { return r.oa; }); }
MeanStd EvalReport::kappa() const { return summarize(runs, [](const RunMetrics& r) { return r.kappa; }); }
MeanStd EvalReport::aa() const { return summarize(runs, [](const RunMetrics& r) { return r.aa; }); }

std::string Comparison::to_json() const {
    nlohmann::ordered_json root;
    auto models = nlohmann::ordered_json::array();
    for (const auto& rep : reports) {
        nlohmann::ordered_json m;
        m["label"] = rep.label;
        m["classes"] = rep.classes;
        auto per_class = nlohmann::ordered_json::array();
        for (std::size_t j = 0; j < rep.classes; ++j) {
            const auto s = rep.class_summary(j);
            per_class.push_back(s ? summary_json(*s) : nlohmann::ordered_json(nullptr));
        }
        m["per_class"] = std::move(per_class);
        m["oa"] = summary_json(rep.oa());
        m["kappa"] = summary_json(rep.kappa());
        m["aa"] = summary_json(rep.aa());
        auto runs = nlohmann::ordered_json::array();
        for (const auto& r : rep.runs) {
            nlohmann::ordered_json jr;
            jr["seed"] = r.seed;
            jr["oa"] = r.oa;
            jr["kappa"] = r.kappa;
            jr["aa"] = r.aa;
            auto pc = nlohmann::ordered_json::array();
            for (const auto& c : r.per_class) pc.push_back(c ? nlohmann::ordered_json(*c) : nlohmann::ordered_json(nullptr));
            jr["per_class"] = std::move(pc);
            jr["confusion"] = r.confusion.counts();
            runs.push_back(std::move(jr));
        }
        m["runs"] = std::move(runs);
        models.push_back(std::move(m));
    }
    root["models"] = std::move(models);
    if (mcnemar) {
        root["mcnemar"] = {{"a", reports.at(0).label},
                           {"b", reports.at(1).label},
                           {"seed", mcnemar_seed},
                           {"f12", mcnemar->f12},
                           {"f21", mcnemar->f21},
                           {"statistic", mcnemar->statistic},
                           {"significant", mcnemar->significant}};
    }
    return root.dump(2) + "\n";
}

std::string Comparison::to_table() const {
    if (reports.empty()) throw ContractError("report has no models");
    const std::size_t classes = reports.front().classes;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Class"};
    for (const auto& rep : reports) header.push_back(rep.label);
    rows.push_back(header);
    for (std::size_t j = 0; j < classes; ++j) {
        std::vector<std::string> row{std::to_string(j)};
        for (const auto& rep : reports) {
            const auto s = rep.class_summary(j);
            row.push_back(s ? percent(*s) : "n/a");
        }
        rows.push_back(std::move(row));
    }
    const std::pair<const char*, MeanStd (EvalReport::*)() const> summary[] = {
        {"OA", &EvalReport::oa}, {"kappa", &EvalReport::kappa}, {"AA", &EvalReport::aa}};
    for (const auto& [name, fn] : summary) {
        std::vector<std::string> row{name};
        for (const auto& rep : reports) row.push_back(percent((rep.*fn)()));
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
    }
    std::string out;
    const std::size_t rule_at = 1, summary_at = 1 + classes;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == rule_at || r == summary_at) {
            std::size_t total = 0;
            for (auto w : widths) total += w + 2;
            out += std::string(total - 2, '-') + "\n";
        }
        std::string line;
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (c > 0) line += "  ";
            line += pad(rows[r][c], widths[c], c > 0);
        }
        out += line + "\n";
    }
    if (mcnemar) {
        out += fmt::format("McNemar {} vs {} (seed {}): f12={} f21={} M_t={:.3f}{}\n", reports.at(0).label,
                           reports.at(1).label, mcnemar_seed, mcnemar->f12, mcnemar->f21, mcnemar->statistic,
                           mcnemar->significant ? " significant" : "");
    }
    return out;
}

}  // namespace mgsgan::eval
