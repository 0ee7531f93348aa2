#include "icrlab/objectives.hpp"

#include "icrlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace icrlab {

std::vector<double> group_advantages(std::span<const double> rewards)
{
    const auto n = rewards.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) {
        return out;
    }
    const bool constant = std::all_of(rewards.begin(), rewards.end(),
                                      [&](double r) { return r == rewards[0]; });
    if (constant) {
        return out;
    }
    double mean = 0.0;
    for (const double r : rewards) {
        mean += r;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double r : rewards) {
        var += (r - mean) * (r - mean);
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd == 0.0) {
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (rewards[i] - mean) / sd;
    }
    return out;
}

SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_low, double clip_high)
{
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip_low, 1.0 + clip_high);
    const double unclipped = ratio * advantage;
    const double clipped = clipped_ratio * advantage;
    if (unclipped <= clipped) {
        return SurrogateTerm{ratio, advantage, unclipped, SurrogateBranch::Unclipped};
    }
    return SurrogateTerm{ratio, advantage, clipped, SurrogateBranch::Clipped};
}

double clipped_surrogate_value(double ratio, double advantage, double clip_low, double clip_high)
{
    return clipped_surrogate(ratio, advantage, clip_low, clip_high).clipped_value;
}

RegularizerTerm regularizer_term(double ratio, double clip_low, double clip_high)
{
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip_low, 1.0 + clip_high);
    if (ratio <= clipped_ratio) {
        return RegularizerTerm{ratio, 1.0};
    }
    return RegularizerTerm{clipped_ratio, 0.0};
}

std::vector<int> shortest_correct_set(std::span<const Rollout> rollouts, SelectionVariant variant)
{
    std::vector<int> selected;
    const int n = static_cast<int>(rollouts.size());
    switch (variant) {
    case SelectionVariant::AllSamples:
        for (int i = 0; i < n; ++i) {
            selected.push_back(i);
        }
        return selected;
    case SelectionVariant::ShortestAny:
    case SelectionVariant::ShortestCorrect: {
        const bool need_correct = variant == SelectionVariant::ShortestCorrect;
        int best = std::numeric_limits<int>::max();
        for (const auto& r : rollouts) {
            if (!need_correct || r.correct) {
                best = std::min(best, r.length);
            }
        }
        for (int i = 0; i < n; ++i) {
            const auto& r = rollouts[static_cast<std::size_t>(i)];
            if ((!need_correct || r.correct) && r.length == best) {
                selected.push_back(i);
            }
        }
        return selected;
    }
    }
    return selected;
}

IcrWeight icr_weight(double alpha0, int batch_queries, int selected_count)
{
    IcrWeight w{alpha0, batch_queries, selected_count, 0.0};
    if (selected_count > 0) {
        w.alpha = alpha0 * static_cast<double>(batch_queries) / static_cast<double>(selected_count);
    }
    return w;
}

LossContext LossContext::from_config(const TaskSpec& task, const PolicyParams& params,
                                     const TrainConfig& config, int workers)
{
    return LossContext{
        task,
        params,
        config.clip_low,
        config.clip_high,
        config.sample_temperature,
        config.objective_mode,
        config.alpha0,
        config.alpha_scaling,
        workers,
    };
}

namespace {

struct GroupTerms {
    double grpo{0.0};
    double regularizer{0.0};
    std::vector<double> grpo_grad;
    std::vector<double> reg_grad;
};

// Per-group contributions before averaging over groups. The regulariser part receives
// the selection set and alpha only; advantages are never passed to it.
GroupTerms group_terms(const RolloutGroup& group, const LossContext& ctx, bool want_grpo,
                       bool want_regularizer, int batch_groups, int group_index)
{
    const auto& params = ctx.params;
    const auto& layout = params.layout();
    GroupTerms out;
    out.grpo_grad.assign(want_grpo ? params.size() : 0, 0.0);

    const auto G = static_cast<double>(group.size());
    const auto weight = icr_weight(ctx.alpha0, batch_groups, static_cast<int>(group.shortest_correct.size()));
    const bool regularize = want_regularizer && weight.selected_count > 0;
    if (regularize) {
        out.reg_grad.assign(params.size(), 0.0);
    }

    std::vector<char> selected(static_cast<std::size_t>(group.size()), 0);
    for (const int i : group.shortest_correct) {
        selected[static_cast<std::size_t>(i)] = 1;
    }

    std::vector<double> probs(static_cast<std::size_t>(layout.vocab));
    for (int i = 0; i < group.size(); ++i) {
        const auto& rollout = group.rollouts[static_cast<std::size_t>(i)];
        const bool in_set = regularize && selected[static_cast<std::size_t>(i)] != 0;
        if (!want_grpo && !in_set) {
            continue;
        }
        const double token_weight = 1.0 / (G * static_cast<double>(rollout.length));
        const auto feats = response_features(layout, ctx.task, group.query, rollout.tokens);

        double grpo_sum = 0.0;
        double reg_sum = 0.0;
        for (std::size_t t = 0; t < feats.size(); ++t) {
            const auto lp = log_probs(params, feats[t], ctx.temperature);
            const auto token = rollout.tokens[t];
            const double log_ratio = lp[token.value] - rollout.old_logprobs[t];
            if (!(std::abs(log_ratio) <= kMaxAbsLogRatio)) {
                std::ostringstream msg;
                msg << "log-ratio " << log_ratio << " out of range in group " << group_index
                    << ", rollout " << i << ", token " << t;
                throw NumericalError(msg.str());
            }
            const double ratio = std::exp(log_ratio);
            for (std::size_t v = 0; v < probs.size(); ++v) {
                probs[v] = std::exp(lp[v]);
            }

            if (want_grpo) {
                const double advantage = group.advantages[static_cast<std::size_t>(i)];
                const auto term = clipped_surrogate(ratio, advantage, ctx.clip_low, ctx.clip_high);
                grpo_sum += term.clipped_value;
                const double dr = term.ratio_gradient();
                if (dr != 0.0) {
                    accumulate_grad_logprob(layout, feats[t], token, probs, token_weight * dr * ratio,
                                            ctx.temperature, out.grpo_grad);
                }
            }
            if (in_set) {
                const auto term = regularizer_term(ratio, ctx.clip_low, ctx.clip_high);
                reg_sum += term.value;
                if (term.ratio_gradient != 0.0) {
                    accumulate_grad_logprob(layout, feats[t], token, probs,
                                            weight.alpha * token_weight * term.ratio_gradient * ratio,
                                            ctx.temperature, out.reg_grad);
                }
            }
        }
        out.grpo += token_weight * grpo_sum;
        out.regularizer += weight.alpha * token_weight * reg_sum;
    }
    return out;
}

LossResult combine_groups(std::span<const RolloutGroup> groups, const LossContext& ctx,
                          bool want_grpo, bool want_regularizer)
{
    const int n = static_cast<int>(groups.size());
    LossResult result;
    result.gradient.assign(ctx.params.size(), 0.0);
    if (n == 0) {
        return result;
    }

    std::vector<GroupTerms> terms(static_cast<std::size_t>(n));
    parallel_for(n, ctx.workers, [&](int g) {
        terms[static_cast<std::size_t>(g)] =
            group_terms(groups[static_cast<std::size_t>(g)], ctx, want_grpo, want_regularizer, n, g);
    });

    const double inv_n = 1.0 / static_cast<double>(n);
    const double reg_scale = ctx.alpha_scaling == AlphaScaling::BatchMean ? inv_n : 1.0;

    if (want_grpo) {
        std::vector<double> grad(ctx.params.size(), 0.0);
        double value = 0.0;
        for (const auto& t : terms) {
            value += t.grpo;
            for (std::size_t k = 0; k < grad.size(); ++k) {
                grad[k] += t.grpo_grad[k];
            }
        }
        result.grpo_term = value * inv_n;
        for (std::size_t k = 0; k < grad.size(); ++k) {
            result.gradient[k] = grad[k] * inv_n;
        }
    }

    const bool any_selected = want_regularizer &&
        std::any_of(terms.begin(), terms.end(), [](const GroupTerms& t) { return !t.reg_grad.empty(); });
    result.objective = result.grpo_term;
    if (any_selected) {
        std::vector<double> grad(ctx.params.size(), 0.0);
        double value = 0.0;
        for (const auto& t : terms) {
            if (t.reg_grad.empty()) {
                continue;
            }
            value += t.regularizer;
            for (std::size_t k = 0; k < grad.size(); ++k) {
                grad[k] += t.reg_grad[k];
            }
        }
        result.regularizer_term = value * reg_scale;
        for (std::size_t k = 0; k < grad.size(); ++k) {
            result.gradient[k] += grad[k] * reg_scale;
        }
        result.objective = want_grpo ? result.grpo_term + result.regularizer_term
                                     : result.regularizer_term;
    }

    return result;
}

}  // namespace

LossResult grpo_loss_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx)
{
    return combine_groups(groups, ctx, true, false);
}

LossResult icr_loss_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx)
{
    return combine_groups(groups, ctx, uses_grpo_term(ctx.mode), true);
}

LossResult regularizer_loss_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx)
{
    return combine_groups(groups, ctx, false, true);
}

LossResult objective_and_grad(std::span<const RolloutGroup> groups, const LossContext& ctx)
{
    if (uses_regularizer(ctx.mode)) {
        return icr_loss_and_grad(groups, ctx);
    }
    return grpo_loss_and_grad(groups, ctx);
}

}  // namespace icrlab
