#include "icrlab/tasks.hpp"

#include <algorithm>

namespace icrlab {

TaskSpec TaskSpec::from_config(const TrainConfig& config)
{
    return TaskSpec{config.task_base, config.task_query_len, config.length_budget};
}

Query sample_query(const TaskSpec& task, RandomStream& stream, std::int64_t id)
{
    Query query;
    query.id = id;
    query.tokens.reserve(static_cast<std::size_t>(task.query_len));
    for (int i = 0; i < task.query_len; ++i) {
        query.tokens.emplace_back(static_cast<int>(stream.below(static_cast<std::uint64_t>(task.base))));
    }
    return query;
}

int target_digit(const TaskSpec& task, const Query& query)
{
    int sum = 0;
    for (const auto t : query.tokens) {
        sum = (sum + t.value) % task.base;
    }
    return sum;
}

bool verify(const TaskSpec& task, const Query& query, std::span<const TokenId> response)
{
    const auto n = response.size();
    if (n < 3 || n > static_cast<std::size_t>(task.length_budget)) {
        return false;
    }
    if (response[n - 1] != task.eos() || response[n - 3] != task.answer()) {
        return false;
    }
    for (std::size_t i = 0; i + 3 < n; ++i) {
        const auto t = response[i];
        if (t != task.think() && !task.is_digit(t)) {
            return false;
        }
    }
    const auto d = response[n - 2];
    return task.is_digit(d) && d.value == target_digit(task, query);
}

// ---------------------------------------------------------------- synthetic groups

double CorrectnessLaw::probability(int length) const
{
    const double p = intercept + slope * static_cast<double>(length) / reference_length;
    return std::clamp(p, 0.0, 1.0);
}

CorrectnessLaw CorrectnessLaw::constant(double p, int reference_length)
{
    return CorrectnessLaw{p, 0.0, reference_length};
}

CorrectnessLaw CorrectnessLaw::decreasing(int reference_length)
{
    return CorrectnessLaw{1.0, -1.0, reference_length};
}

CorrectnessLaw CorrectnessLaw::increasing(int reference_length)
{
    return CorrectnessLaw{0.0, 1.0, reference_length};
}

std::vector<SyntheticSample> sample_synthetic_group(const GroupDistribution& dist,
                                                    RandomStream& stream)
{
    const auto span = static_cast<std::uint64_t>(dist.length_law.max_length - dist.length_law.min_length + 1);
    std::vector<SyntheticSample> group;
    group.reserve(static_cast<std::size_t>(dist.group_size));
    for (int i = 0; i < dist.group_size; ++i) {
        const int length = dist.length_law.min_length + static_cast<int>(stream.below(span));
        const bool correct = stream.uniform() < dist.correctness_law.probability(length);
        group.push_back({length, correct});
    }
    return group;
}

}  // namespace icrlab
