#include "icrlab/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace icrlab {

std::string_view to_string(Regime regime)
{
    switch (regime) {
    case Regime::Overthinking:
        return "overthinking";
    case Regime::Underthinking:
        return "underthinking";
    case Regime::Neutral:
        return "neutral";
    }
    return "neutral";
}

namespace {

Regime parse_regime(std::string_view text)
{
    if (text == "overthinking") {
        return Regime::Overthinking;
    }
    if (text == "underthinking") {
        return Regime::Underthinking;
    }
    return Regime::Neutral;
}

}  // namespace

std::optional<double> group_correlation(std::span<const double> lengths, std::span<const int> correct)
{
    const std::size_t n = std::min(lengths.size(), correct.size());
    if (n < 2) {
        return std::nullopt;
    }
    // Welford-style running means and co-moments.
    double mean_x = 0.0;
    double mean_y = 0.0;
    double m2_x = 0.0;
    double m2_y = 0.0;
    double c_xy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double k = static_cast<double>(i + 1);
        const double x = lengths[i];
        const double y = correct[i] != 0 ? 1.0 : 0.0;
        const double dx = x - mean_x;
        const double dy = y - mean_y;
        mean_x += dx / k;
        mean_y += dy / k;
        m2_x += dx * (x - mean_x);
        m2_y += dy * (y - mean_y);
        c_xy += dx * (y - mean_y);
    }
    if (m2_x <= 0.0 || m2_y <= 0.0) {
        return std::nullopt;
    }
    const double r = c_xy / std::sqrt(m2_x * m2_y);
    return std::clamp(r, -1.0, 1.0);
}

std::optional<double> group_correlation(std::span<const Rollout> rollouts)
{
    std::vector<double> lengths;
    std::vector<int> correct;
    lengths.reserve(rollouts.size());
    correct.reserve(rollouts.size());
    for (const auto& r : rollouts) {
        lengths.push_back(static_cast<double>(r.length));
        correct.push_back(r.correct ? 1 : 0);
    }
    return group_correlation(lengths, correct);
}

BatchCorrelation batch_correlation(std::span<const std::optional<double>> group_correlations)
{
    BatchCorrelation out;
    if (group_correlations.empty()) {
        return out;
    }
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& c : group_correlations) {
        if (c) {
            sum += *c;
            ++defined;
        }
    }
    out.valid_fraction = static_cast<double>(defined) / static_cast<double>(group_correlations.size());
    if (defined > 0) {
        out.mean = sum / static_cast<double>(defined);
    }
    return out;
}

BatchCorrelation batch_correlation(std::span<const RolloutGroup> groups)
{
    std::vector<std::optional<double>> values;
    values.reserve(groups.size());
    for (const auto& g : groups) {
        values.push_back(g.group_correlation);
    }
    return batch_correlation(values);
}

Regime classify_regime(std::optional<double> correlation, double deadband)
{
    if (!correlation) {
        return Regime::Neutral;
    }
    if (*correlation < -deadband) {
        return Regime::Overthinking;
    }
    if (*correlation > deadband) {
        return Regime::Underthinking;
    }
    return Regime::Neutral;
}

std::optional<double> pi_s_mean_length(std::span<const RolloutGroup> groups)
{
    double sum = 0.0;
    int count = 0;
    for (const auto& g : groups) {
        int shortest = std::numeric_limits<int>::max();
        for (const auto& r : g.rollouts) {
            if (r.correct) {
                shortest = std::min(shortest, r.length);
            }
        }
        if (shortest != std::numeric_limits<int>::max()) {
            sum += shortest;
            ++count;
        }
    }
    if (count == 0) {
        return std::nullopt;
    }
    return sum / count;
}

BatchSummary summarize(std::span<const RolloutGroup> groups)
{
    BatchSummary s;
    std::size_t n = 0;
    double correct = 0.0;
    double length = 0.0;
    double truncated = 0.0;
    for (const auto& g : groups) {
        for (const auto& r : g.rollouts) {
            ++n;
            correct += r.correct ? 1.0 : 0.0;
            length += r.length;
            truncated += r.truncated ? 1.0 : 0.0;
        }
    }
    if (n > 0) {
        s.accuracy = correct / static_cast<double>(n);
        s.mean_length = length / static_cast<double>(n);
        s.truncation_rate = truncated / static_cast<double>(n);
    }
    return s;
}

// ---------------------------------------------------------------- Pareto

std::vector<ParetoRow> pareto_table(std::vector<ParetoPoint> points)
{
    std::stable_sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        if (a.mean_length != b.mean_length) {
            return a.mean_length < b.mean_length;
        }
        return a.accuracy > b.accuracy;
    });
    std::vector<ParetoRow> rows;
    rows.reserve(points.size());
    for (const auto& p : points) {
        bool dominated = false;
        for (const auto& q : points) {
            const bool no_worse = q.mean_length <= p.mean_length && q.accuracy >= p.accuracy;
            const bool strictly_better = q.mean_length < p.mean_length || q.accuracy > p.accuracy;
            if (no_worse && strictly_better) {
                dominated = true;
                break;
            }
        }
        rows.push_back({p, dominated});
    }
    return rows;
}

void write_pareto_csv(std::ostream& out, std::span<const ParetoRow> rows)
{
    out << "run_id,objective_mode,lambda,mean_length,accuracy,dominated\n";
    for (const auto& row : rows) {
        out << row.point.run_id << ',' << row.point.objective_mode << ','
            << format_double(row.point.lambda) << ',' << format_double(row.point.mean_length) << ','
            << format_double(row.point.accuracy) << ',' << (row.dominated ? "true" : "false") << '\n';
    }
}

// ---------------------------------------------------------------- JSONL

namespace {

nlohmann::json optional_json(const std::optional<double>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j)
{
    if (j.is_null()) {
        return std::nullopt;
    }
    return j.get<double>();
}

}  // namespace

std::string to_json_line(const StepRecord& r)
{
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["train_accuracy"] = r.train_accuracy;
    j["mean_length"] = r.mean_length;
    j["batch_correlation"] = optional_json(r.batch_correlation);
    j["valid_group_fraction"] = r.valid_group_fraction;
    j["pi_s_mean_length"] = optional_json(r.pi_s_mean_length);
    j["objective_value"] = r.objective_value;
    j["regularizer_value"] = r.regularizer_value;
    j["grad_norm"] = r.grad_norm;
    j["truncation_rate"] = r.truncation_rate;
    j["regime"] = std::string(to_string(r.regime));
    j["eval_accuracy"] = optional_json(r.eval_accuracy);
    j["eval_mean_length"] = optional_json(r.eval_mean_length);
    return j.dump();
}

StepRecord from_json_line(std::string_view line)
{
    const auto j = nlohmann::json::parse(line);
    StepRecord r;
    r.step = j.at("step").get<int>();
    r.train_accuracy = j.at("train_accuracy").get<double>();
    r.mean_length = j.at("mean_length").get<double>();
    r.batch_correlation = optional_from(j.at("batch_correlation"));
    r.valid_group_fraction = j.at("valid_group_fraction").get<double>();
    r.pi_s_mean_length = optional_from(j.at("pi_s_mean_length"));
    r.objective_value = j.at("objective_value").get<double>();
    r.regularizer_value = j.at("regularizer_value").get<double>();
    r.grad_norm = j.at("grad_norm").get<double>();
    r.truncation_rate = j.at("truncation_rate").get<double>();
    r.regime = parse_regime(j.at("regime").get<std::string>());
    r.eval_accuracy = optional_from(j.at("eval_accuracy"));
    r.eval_mean_length = optional_from(j.at("eval_mean_length"));
    return r;
}

}  // namespace icrlab
