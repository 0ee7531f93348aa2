#include "icrlab/rewards.hpp"

#include <algorithm>

namespace icrlab {

double correctness_reward(const Rollout& rollout)
{
    return rollout.correct && !rollout.truncated ? 1.0 : 0.0;
}

double lpf_length_reward(int length, int lmin, int lmax)
{
    if (lmin >= lmax) {
        throw ConfigError("lpf bounds require lmin < lmax");
    }
    if (length <= lmin) {
        return 0.0;
    }
    if (length > lmax) {
        return -1.0;
    }
    return static_cast<double>(lmin - length) / static_cast<double>(lmax - lmin);
}

std::vector<double> lpg_length_reward(const std::vector<int>& lengths, const std::vector<bool>& correct)
{
    std::vector<double> out(lengths.size(), 0.0);
    if (lengths.empty()) {
        return out;
    }
    const auto [lo, hi] = std::minmax_element(lengths.begin(), lengths.end());
    const int shortest = *lo;
    const int longest = *hi;
    if (shortest == longest) {
        return out;
    }
    const double range = static_cast<double>(longest - shortest);
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double base = 0.5 - static_cast<double>(lengths[i] - shortest) / range;
        out[i] = correct[i] ? base : std::min(0.0, base);
    }
    return out;
}

double combine(double correctness, double length_term, double lambda)
{
    return correctness + lambda * length_term;
}

std::vector<RewardBreakdown> shape_group_rewards(std::span<const Rollout> rollouts,
                                                 const TrainConfig& config)
{
    std::vector<RewardBreakdown> out(rollouts.size());
    const auto mode = config.objective_mode;
    const double lambda = uses_lpf(mode) || uses_lpg(mode) ? config.lambda : 0.0;

    std::vector<double> length_terms(rollouts.size(), 0.0);
    if (uses_lpf(mode)) {
        for (std::size_t i = 0; i < rollouts.size(); ++i) {
            length_terms[i] = lpf_length_reward(rollouts[i].length, config.lpf_lmin, config.lpf_lmax);
        }
    } else if (uses_lpg(mode)) {
        std::vector<int> lengths;
        std::vector<bool> correct;
        for (const auto& r : rollouts) {
            lengths.push_back(r.length);
            correct.push_back(correctness_reward(r) > 0.0);
        }
        length_terms = lpg_length_reward(lengths, correct);
    }

    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        const double corr = correctness_reward(rollouts[i]);
        out[i] = RewardBreakdown{corr, length_terms[i], lambda, combine(corr, length_terms[i], lambda)};
    }
    return out;
}

}  // namespace icrlab
