#pragma once

// Correctness reward and the two length shapings, combined as
//   R_i = R_corr + lambda * R_len.

#include "icrlab/core.hpp"

#include <span>

namespace icrlab {

struct RewardBreakdown {
    double correctness{0.0};
    double length_term{0.0};
    double lambda{0.0};
    double total{0.0};
};

double correctness_reward(const Rollout& rollout);

// Fixed-reference ramp: 0 up to lmin, linear down to -1 at lmax, -1 beyond.
// Throws ConfigError unless lmin < lmax.
double lpf_length_reward(int length, int lmin, int lmax);

// Group-wise min-max shaping. base_i = 0.5 - (len_i - min)/(max - min); incorrect
// rollouts are clamped to min(0, base_i); a group of equal lengths gets all zeros.
std::vector<double> lpg_length_reward(const std::vector<int>& lengths, const std::vector<bool>& correct);

double combine(double correctness, double length_term, double lambda);

// Shaped rewards for one group under the given mode. Pure grpo/icr/only-regularizer
// modes ignore lambda and return the correctness rewards.
std::vector<RewardBreakdown> shape_group_rewards(std::span<const Rollout> rollouts,
                                                 const TrainConfig& config);

}  // namespace icrlab
