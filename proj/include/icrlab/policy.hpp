#pragma once

// Linear-softmax autoregressive policy over one-hot context features.
//
// Context features are three concatenated one-hot blocks:
//   [previous token (vocab + BOS)] [position bucket] [running digit-sum mod base]
// and the logits are W * feature with W of shape vocab x feature_dim, stored row-major
// in a flat vector.

#include "icrlab/core.hpp"
#include "icrlab/tasks.hpp"

#include <array>
#include <span>

namespace icrlab {

// derive_stream_id kind used for the initial answer-mapping jitter.
inline constexpr std::uint64_t kInitStreamKind = 5;

struct FeatureLayout {
    int vocab{13};
    int base{10};
    int buckets{8};
    int length_budget{64};

    [[nodiscard]] int bos_slot() const { return vocab; }
    [[nodiscard]] int prev_offset() const { return 0; }
    [[nodiscard]] int bucket_offset() const { return vocab + 1; }
    [[nodiscard]] int sum_offset() const { return vocab + 1 + buckets; }
    [[nodiscard]] int dim() const { return vocab + 1 + buckets + base; }
    [[nodiscard]] int param_count() const { return vocab * dim(); }

    // Equal-width buckets over [0, length_budget]; positions past the budget clamp.
    [[nodiscard]] int bucket_of(int position) const;

    static FeatureLayout for_task(const TaskSpec& task, int buckets);
    bool operator==(const FeatureLayout&) const = default;
};

// Exactly three active (value 1) coordinates, one per block.
struct FeatureVector {
    std::array<int, 3> active{};
    int dim{0};

    [[nodiscard]] std::vector<double> dense() const;
    bool operator==(const FeatureVector&) const = default;
};

// pre: position == prefix.size()
FeatureVector features(const FeatureLayout& layout, const TaskSpec& task, const Query& query,
                       std::span<const TokenId> prefix, int position);

// Features for every step of a response, computed incrementally.
std::vector<FeatureVector> response_features(const FeatureLayout& layout, const TaskSpec& task,
                                             const Query& query, std::span<const TokenId> response);

class PolicyParams {
public:
    PolicyParams() = default;
    explicit PolicyParams(FeatureLayout layout);
    PolicyParams(FeatureLayout layout, std::vector<double> weights);

    // Overthinking-biased "base model" start; see README for the prior's structure.
    static PolicyParams initial(const FeatureLayout& layout, const TrainConfig& config);

    [[nodiscard]] const FeatureLayout& layout() const { return layout_; }
    [[nodiscard]] std::span<const double> weights() const { return weights_; }
    [[nodiscard]] std::span<double> weights() { return weights_; }
    [[nodiscard]] std::size_t size() const { return weights_.size(); }

    double& at(int token, int feature) { return weights_[index(token, feature)]; }
    [[nodiscard]] double at(int token, int feature) const { return weights_[index(token, feature)]; }

    [[nodiscard]] std::size_t index(int token, int feature) const
    {
        return static_cast<std::size_t>(token) * static_cast<std::size_t>(layout_.dim()) +
               static_cast<std::size_t>(feature);
    }

    [[nodiscard]] bool all_finite() const;

    bool operator==(const PolicyParams&) const = default;

private:
    FeatureLayout layout_;
    std::vector<double> weights_;
};

// Frozen copy of the parameters that generated a batch of rollouts.
class PolicySnapshot {
public:
    explicit PolicySnapshot(PolicyParams params) : params_{std::move(params)} {}
    [[nodiscard]] const PolicyParams& params() const { return params_; }

private:
    PolicyParams params_;
};

std::vector<double> logits(const PolicyParams& params, const FeatureVector& feature);

// log softmax(logits / temperature)
std::vector<double> log_probs(const PolicyParams& params, const FeatureVector& feature,
                              double temperature = 1.0);

double token_logprob(const PolicyParams& params, const FeatureVector& feature, TokenId token,
                     double temperature = 1.0);

// d token_logprob / d theta as a dense flat vector. Row `token` gets (1 - p_token) * f / T,
// every other row v gets -p_v * f / T.
std::vector<double> grad_logprob(const PolicyParams& params, const FeatureVector& feature,
                                 TokenId token, double temperature = 1.0);

// grad += scale * d log p(token) / d theta, given probs = softmax(logits / temperature).
void accumulate_grad_logprob(const FeatureLayout& layout, const FeatureVector& feature,
                             TokenId token, std::span<const double> probs, double scale,
                             double temperature, std::span<double> grad);

struct SamplingOptions {
    double temperature{1.0};
    double top_p{1.0};  // 1.0 disables nucleus filtering
};

// Autoregressive sampling until EOS or the task's length budget. `correct` is filled by
// verify; `shaped_reward` is left at zero.
Rollout sample_rollout(const PolicySnapshot& snapshot, const TaskSpec& task, const Query& query,
                       const SamplingOptions& options, RandomStream& stream);

// Draws an index from a normalised probability vector by inverse CDF.
int sample_categorical(std::span<const double> probs, RandomStream& stream);

// Keeps the smallest highest-probability prefix with mass >= top_p and renormalises.
// Ties are ordered by token index.
std::vector<double> nucleus_filter(std::span<const double> probs, double top_p);

}  // namespace icrlab
