#pragma once

// Training diagnostics: accuracy, length, group-wise length/correctness correlation,
// regime classification, shortest-correct length and accuracy-length Pareto tables.

#include "icrlab/core.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>

namespace icrlab {

enum class Regime { Overthinking, Underthinking, Neutral };

std::string_view to_string(Regime regime);

struct StepRecord {
    int step{0};
    double train_accuracy{0.0};
    double mean_length{0.0};
    std::optional<double> batch_correlation;
    double valid_group_fraction{0.0};
    std::optional<double> pi_s_mean_length;
    double objective_value{0.0};
    double regularizer_value{0.0};
    double grad_norm{0.0};
    double truncation_rate{0.0};
    Regime regime{Regime::Neutral};
    std::optional<double> eval_accuracy;
    std::optional<double> eval_mean_length;

    bool operator==(const StepRecord&) const = default;
};

// Pearson correlation of length with 0/1 correctness; nullopt when either side has zero
// variance. Single-pass co-moment accumulation.
std::optional<double> group_correlation(std::span<const double> lengths, std::span<const int> correct);
std::optional<double> group_correlation(std::span<const Rollout> rollouts);

struct BatchCorrelation {
    std::optional<double> mean;
    double valid_fraction{0.0};
};

// Mean over groups whose correlation is defined.
BatchCorrelation batch_correlation(std::span<const std::optional<double>> group_correlations);
BatchCorrelation batch_correlation(std::span<const RolloutGroup> groups);

Regime classify_regime(std::optional<double> correlation, double deadband = 0.02);

// Mean over groups with at least one correct rollout of the minimal correct length.
std::optional<double> pi_s_mean_length(std::span<const RolloutGroup> groups);

// Accuracy and mean length over every rollout in the batch.
struct BatchSummary {
    double accuracy{0.0};
    double mean_length{0.0};
    double truncation_rate{0.0};
};
BatchSummary summarize(std::span<const RolloutGroup> groups);

// ---------------------------------------------------------------- Pareto

struct ParetoPoint {
    std::string run_id;
    std::string objective_mode;
    double lambda{0.0};
    double mean_length{0.0};
    double accuracy{0.0};
};

struct ParetoRow {
    ParetoPoint point;
    bool dominated{false};
};

// Rows sorted by length (then accuracy descending). A point is dominated when another
// has length <= and accuracy >= with at least one strict.
std::vector<ParetoRow> pareto_table(std::vector<ParetoPoint> points);

void write_pareto_csv(std::ostream& out, std::span<const ParetoRow> rows);

// ---------------------------------------------------------------- JSONL

// One JSON object, keys exactly the StepRecord field names, undefined values as null.
std::string to_json_line(const StepRecord& record);
StepRecord from_json_line(std::string_view line);

}  // namespace icrlab
