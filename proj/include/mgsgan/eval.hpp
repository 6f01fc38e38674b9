#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mgsgan::eval {

/// Rows are truth, columns are prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes);
    ConfusionMatrix(std::vector<std::vector<std::uint64_t>> counts);

    static ConfusionMatrix from_predictions(std::span<const std::uint32_t> truth,
                                            std::span<const std::uint32_t> predicted, std::size_t classes);

    void add(std::uint32_t truth, std::uint32_t predicted, std::uint64_t count = 1);
    std::size_t classes() const { return counts_.size(); }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth).at(predicted); }
    std::uint64_t total() const;
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t col_sum(std::size_t predicted) const;
    const std::vector<std::vector<std::uint64_t>>& counts() const { return counts_; }

private:
    std::vector<std::vector<std::uint64_t>> counts_;
};

/// trace / M. Throws ContractError on an empty matrix.
double overall_accuracy(const ConfusionMatrix& cm);
/// (p_o - p_e) / (1 - p_e); 0 when p_e == 1.
double cohen_kappa(const ConfusionMatrix& cm);
/// Recall of one class; throws ContractError if it has no true samples.
double class_accuracy(const ConfusionMatrix& cm, std::size_t cls);
/// Mean per-class recall; throws ContractError naming the first empty row.
double average_accuracy(const ConfusionMatrix& cm);

struct McNemarResult {
    std::uint64_t f12 = 0;  // A right, B wrong
    std::uint64_t f21 = 0;  // A wrong, B right
    double statistic = 0.0;
    bool significant = false;
};

inline constexpr double kMcNemarThreshold = 1.96;

/// Signed z = (f12 - f21) / sqrt(f12 + f21); with continuity correction the
/// numerator magnitude shrinks by 1 (floored at 0). Zero when f12 + f21 = 0.
McNemarResult mcnemar(std::span<const std::uint32_t> preds_a, std::span<const std::uint32_t> preds_b,
                      std::span<const std::uint32_t> truth, bool continuity_correction = false);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single run
};

MeanStd mean_std(std::span<const double> values);

/// Metrics for one evaluated model.
struct RunMetrics {
    std::uint64_t seed = 0;
    std::vector<std::optional<double>> per_class;  // nullopt: class absent from the test split
    double oa = 0.0;
    double kappa = 0.0;
    double aa = 0.0;
    ConfusionMatrix confusion{0};
};

/// Per-class recall over present classes; AA averages the present classes.
RunMetrics compute_metrics(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> predicted,
                           std::size_t classes, std::uint64_t seed = 0);

/// One model's metrics over one or more seeded runs.
struct EvalReport {
    std::string label;
    std::size_t classes = 0;
    std::vector<RunMetrics> runs;

    /// nullopt when the class is absent from every run's test split.
    std::optional<MeanStd> class_summary(std::size_t cls) const;
    MeanStd oa() const;
    MeanStd kappa() const;
    MeanStd aa() const;
};

/// Reports side by side, optionally with a McNemar test of the first
/// against the second.
struct Comparison {
    std::vector<EvalReport> reports;
    std::optional<McNemarResult> mcnemar;
    std::uint64_t mcnemar_seed = 0;

    std::string to_json() const;
    /// One column per report. Per-class rows, then OA, kappa and AA, as
    /// percentages "mean ± std", then an optional McNemar row.
    std::string to_table() const;
};

}  // namespace mgsgan::eval
