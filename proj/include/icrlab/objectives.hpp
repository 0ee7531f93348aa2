#pragma once

// Group-normalised advantages, the clipped surrogate, shortest-correct selection and the
// implicit compression regulariser, with analytic gradients.

#include "icrlab/core.hpp"
#include "icrlab/policy.hpp"
#include "icrlab/tasks.hpp"

#include <span>

namespace icrlab {

// (R_i - mean) / population std; all zeros when every reward is equal.
std::vector<double> group_advantages(std::span<const double> rewards);

enum class SurrogateBranch { Unclipped, Clipped };

struct SurrogateTerm {
    double ratio{1.0};
    double advantage{0.0};
    double clipped_value{0.0};
    SurrogateBranch active_branch{SurrogateBranch::Unclipped};

    // d clipped_value / d ratio
    [[nodiscard]] double ratio_gradient() const
    {
        return active_branch == SurrogateBranch::Unclipped ? advantage : 0.0;
    }
};

// min(r*A, clip(r, 1-eps_low, 1+eps_high)*A). Ties go to the unclipped branch.
SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_low, double clip_high);

double clipped_surrogate_value(double ratio, double advantage, double clip_low, double clip_high);

// The advantage-free regulariser term min(r, clip(r, 1-eps_low, 1+eps_high)) and its
// derivative with respect to r.
struct RegularizerTerm {
    double value{0.0};
    double ratio_gradient{0.0};
};
RegularizerTerm regularizer_term(double ratio, double clip_low, double clip_high);

std::vector<int> shortest_correct_set(std::span<const Rollout> rollouts, SelectionVariant variant);

// alpha = alpha0 * |B| / |S(q)|; zero when S(q) is empty.
struct IcrWeight {
    double alpha0{0.0};
    int batch_queries{0};
    int selected_count{0};
    double alpha{0.0};
};
IcrWeight icr_weight(double alpha0, int batch_queries, int selected_count);

// Everything the loss needs besides the batch itself.
struct LossContext {
    const TaskSpec& task;
    const PolicyParams& params;
    double clip_low{0.2};
    double clip_high{0.2};
    double temperature{1.0};
    ObjectiveMode mode{ObjectiveMode::Grpo};
    double alpha0{0.5};
    AlphaScaling alpha_scaling{AlphaScaling::BatchMean};
    int workers{1};

    static LossContext from_config(const TaskSpec& task, const PolicyParams& params,
                                   const TrainConfig& config, int workers = 1);
};

struct LossResult {
    double objective{0.0};
    double grpo_term{0.0};
    double regularizer_term{0.0};
    std::vector<double> gradient;  // ascent direction
};

// Mean over groups of (1/G) sum_i (1/|o_i|) sum_t clipped_surrogate(r_it, A_i).
// Groups must carry their advantages. Throws NumericalError if |log r| > 20 anywhere.
LossResult grpo_loss_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx);

// GRPO term (dropped in only-regularizer mode) plus, per group with non-empty
// shortest_correct, alpha_g * (1/G) sum_{i in S} (1/|o_i|) sum_t min(r_it, clip(r_it)),
// averaged over the groups (or summed under AlphaScaling::BatchSum). Never reads advantages
// in the regulariser path.
LossResult icr_loss_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx);

// Dispatches on ctx.mode.
LossResult objective_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx);

// Regulariser alone, already combined across groups as in icr_loss_and_grad.
LossResult regularizer_loss_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx);

inline constexpr double kMaxAbsLogRatio = 20.0;

}  // namespace icrlab
