#include "icrlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icrlab {

namespace {

// Numerically stable log-softmax of z / temperature, written into out.
void log_softmax(std::span<const double> z, double temperature, std::span<double> out)
{
    double max_z = -INFINITY;
    for (std::size_t v = 0; v < z.size(); ++v) {
        out[v] = z[v] / temperature;
        max_z = std::max(max_z, out[v]);
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < z.size(); ++v) {
        sum += std::exp(out[v] - max_z);
    }
    const double log_norm = max_z + std::log(sum);
    for (std::size_t v = 0; v < z.size(); ++v) {
        out[v] -= log_norm;
    }
}

void logits_into(const PolicyParams& params, const FeatureVector& feature, std::span<double> out)
{
    const auto& layout = params.layout();
    const auto w = params.weights();
    const auto dim = static_cast<std::size_t>(layout.dim());
    for (int v = 0; v < layout.vocab; ++v) {
        const auto row = static_cast<std::size_t>(v) * dim;
        out[static_cast<std::size_t>(v)] =
            w[row + static_cast<std::size_t>(feature.active[0])] +
            w[row + static_cast<std::size_t>(feature.active[1])] +
            w[row + static_cast<std::size_t>(feature.active[2])];
    }
}

// Incremental context state shared by sampling and feature extraction.
struct ContextTracker {
    const FeatureLayout& layout;
    const TaskSpec& task;
    int prev_slot;
    int running_sum;
    int position{0};

    ContextTracker(const FeatureLayout& l, const TaskSpec& t, const Query& query)
        : layout{l}, task{t}, prev_slot{l.bos_slot()}, running_sum{target_digit(t, query)}
    {
    }

    [[nodiscard]] FeatureVector current() const
    {
        return FeatureVector{
            {layout.prev_offset() + prev_slot,
             layout.bucket_offset() + layout.bucket_of(position),
             layout.sum_offset() + running_sum},
            layout.dim(),
        };
    }

    void push(TokenId token)
    {
        prev_slot = token.value;
        if (task.is_digit(token)) {
            running_sum = (running_sum + token.value) % task.base;
        }
        ++position;
    }
};

}  // namespace

// ---------------------------------------------------------------- layout / features

int FeatureLayout::bucket_of(int position) const
{
    const auto bucket = static_cast<long long>(position) * buckets / length_budget;
    return static_cast<int>(std::clamp<long long>(bucket, 0, buckets - 1));
}

FeatureLayout FeatureLayout::for_task(const TaskSpec& task, int buckets)
{
    return FeatureLayout{task.vocab_size(), task.base, buckets, task.length_budget};
}

std::vector<double> FeatureVector::dense() const
{
    std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
    for (const int idx : active) {
        out[static_cast<std::size_t>(idx)] = 1.0;
    }
    return out;
}

FeatureVector features(const FeatureLayout& layout, const TaskSpec& task, const Query& query,
                       std::span<const TokenId> prefix, int position)
{
    ContextTracker ctx{layout, task, query};
    for (const auto token : prefix) {
        ctx.push(token);
    }
    ctx.position = position;
    return ctx.current();
}

std::vector<FeatureVector> response_features(const FeatureLayout& layout, const TaskSpec& task,
                                             const Query& query, std::span<const TokenId> response)
{
    std::vector<FeatureVector> out;
    out.reserve(response.size());
    ContextTracker ctx{layout, task, query};
    for (const auto token : response) {
        out.push_back(ctx.current());
        ctx.push(token);
    }
    return out;
}

// ---------------------------------------------------------------- params

PolicyParams::PolicyParams(FeatureLayout layout)
    : layout_{layout}, weights_(static_cast<std::size_t>(layout.param_count()), 0.0)
{
}

PolicyParams::PolicyParams(FeatureLayout layout, std::vector<double> weights)
    : layout_{layout}, weights_{std::move(weights)}
{
    if (weights_.size() != static_cast<std::size_t>(layout_.param_count())) {
        throw ConfigError("parameter vector size does not match feature layout");
    }
}

PolicyParams PolicyParams::initial(const FeatureLayout& layout, const TrainConfig& config)
{
    PolicyParams params{layout};
    const int base = layout.base;
    const int think = base;
    const int eos = base + 2;
    const int bos = layout.bos_slot();

    const double think_bias = config.init_think_bias;
    const double answer_skill = config.init_answer_skill;
    const double format_skill = config.init_format_skill;
    const double scratch_penalty = config.init_scratch_penalty;

    // Thinking contexts prefer THINK.
    params.at(think, layout.prev_offset() + bos) = think_bias;
    params.at(think, layout.prev_offset() + think) = think_bias;

    // The answer digit tracks the running sum; outside the answer slot digits are
    // suppressed so the scratchpad is mostly THINK.
    for (int d = 0; d < base; ++d) {
        params.at(d, layout.sum_offset() + d) += answer_skill;
        for (int prev : {bos, think}) {
            params.at(d, layout.prev_offset() + prev) -= answer_skill + scratch_penalty;
        }
        for (int k = 0; k < base; ++k) {
            params.at(d, layout.prev_offset() + k) -= answer_skill + scratch_penalty;
        }
    }

    // Format prior: EOS follows a digit; after ANSWER only a digit; after a digit
    // neither ANSWER nor THINK; no EOS straight from a thinking context.
    const int answer = base + 1;
    for (int k = 0; k < base; ++k) {
        params.at(eos, layout.prev_offset() + k) = format_skill;
        params.at(answer, layout.prev_offset() + k) = -format_skill;
        params.at(think, layout.prev_offset() + k) = -format_skill;
    }
    for (int token : {think, answer, eos}) {
        params.at(token, layout.prev_offset() + answer) = -format_skill;
    }
    params.at(eos, layout.prev_offset() + bos) = -format_skill;
    params.at(eos, layout.prev_offset() + think) = -format_skill;

    // An imperfect base model: seeded Gaussian jitter on the digit x running-sum block,
    // so some sums start out mapped to the wrong digit.
    if (config.init_answer_noise > 0.0) {
        auto stream = seeded_stream(config.seed, derive_stream_id(kInitStreamKind));
        for (int d = 0; d < base; ++d) {
            for (int s = 0; s < base; ++s) {
                // Box-Muller on the stream's own uniforms keeps the draw platform independent.
                const double u1 = 1.0 - stream.uniform();
                const double u2 = stream.uniform();
                const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
                params.at(d, layout.sum_offset() + s) += config.init_answer_noise * z;
            }
        }
    }
    return params;
}

bool PolicyParams::all_finite() const
{
    return std::all_of(weights_.begin(), weights_.end(), [](double w) { return std::isfinite(w); });
}

// ---------------------------------------------------------------- log-probs

std::vector<double> logits(const PolicyParams& params, const FeatureVector& feature)
{
    std::vector<double> out(static_cast<std::size_t>(params.layout().vocab));
    logits_into(params, feature, out);
    return out;
}

std::vector<double> log_probs(const PolicyParams& params, const FeatureVector& feature,
                              double temperature)
{
    std::vector<double> z(static_cast<std::size_t>(params.layout().vocab));
    logits_into(params, feature, z);
    std::vector<double> out(z.size());
    log_softmax(z, temperature, out);
    return out;
}

double token_logprob(const PolicyParams& params, const FeatureVector& feature, TokenId token,
                     double temperature)
{
    return log_probs(params, feature, temperature)[token.value];
}

void accumulate_grad_logprob(const FeatureLayout& layout, const FeatureVector& feature,
                             TokenId token, std::span<const double> probs, double scale,
                             double temperature, std::span<double> grad)
{
    const auto dim = static_cast<std::size_t>(layout.dim());
    const double s = scale / temperature;
    for (int v = 0; v < layout.vocab; ++v) {
        const double indicator = v == token.value ? 1.0 : 0.0;
        const double coeff = s * (indicator - probs[static_cast<std::size_t>(v)]);
        const auto row = static_cast<std::size_t>(v) * dim;
        for (const int j : feature.active) {
            grad[row + static_cast<std::size_t>(j)] += coeff;
        }
    }
}

std::vector<double> grad_logprob(const PolicyParams& params, const FeatureVector& feature,
                                 TokenId token, double temperature)
{
    auto lp = log_probs(params, feature, temperature);
    for (auto& x : lp) {
        x = std::exp(x);
    }
    std::vector<double> grad(params.size(), 0.0);
    accumulate_grad_logprob(params.layout(), feature, token, lp, 1.0, temperature, grad);
    return grad;
}

// ---------------------------------------------------------------- sampling

int sample_categorical(std::span<const double> probs, RandomStream& stream)
{
    const double u = stream.uniform();
    double cumulative = 0.0;
    int last_positive = 0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
        if (probs[v] <= 0.0) {
            continue;
        }
        last_positive = static_cast<int>(v);
        cumulative += probs[v];
        if (u < cumulative) {
            return static_cast<int>(v);
        }
    }
    return last_positive;
}

std::vector<double> nucleus_filter(std::span<const double> probs, double top_p)
{
    std::vector<double> out(probs.begin(), probs.end());
    if (top_p >= 1.0) {
        return out;
    }
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)]; });
    double kept = 0.0;
    std::size_t n_keep = 0;
    while (n_keep < order.size() && kept < top_p) {
        kept += probs[static_cast<std::size_t>(order[n_keep])];
        ++n_keep;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n_keep; ++i) {
        const auto v = static_cast<std::size_t>(order[i]);
        out[v] = probs[v] / kept;
    }
    return out;
}

Rollout sample_rollout(const PolicySnapshot& snapshot, const TaskSpec& task, const Query& query,
                       const SamplingOptions& options, RandomStream& stream)
{
    const auto& params = snapshot.params();
    const auto& layout = params.layout();
    const auto vocab = static_cast<std::size_t>(layout.vocab);

    Rollout rollout;
    ContextTracker ctx{layout, task, query};
    std::vector<double> z(vocab);
    std::vector<double> lp(vocab);
    std::vector<double> probs(vocab);

    while (rollout.length < task.length_budget) {
        logits_into(params, ctx.current(), z);
        log_softmax(z, options.temperature, lp);
        for (std::size_t v = 0; v < vocab; ++v) {
            probs[v] = std::exp(lp[v]);
        }
        int token = 0;
        double logprob = 0.0;
        if (options.top_p < 1.0) {
            const auto filtered = nucleus_filter(probs, options.top_p);
            token = sample_categorical(filtered, stream);
            logprob = std::log(filtered[static_cast<std::size_t>(token)]);
        } else {
            token = sample_categorical(probs, stream);
            logprob = lp[static_cast<std::size_t>(token)];
        }
        const TokenId sampled{token};
        rollout.tokens.push_back(sampled);
        rollout.old_logprobs.push_back(logprob);
        ++rollout.length;
        ctx.push(sampled);
        if (sampled == task.eos()) {
            break;
        }
    }
    rollout.truncated = rollout.tokens.empty() || rollout.tokens.back() != task.eos();
    rollout.correct = !rollout.truncated && verify(task, query, rollout.tokens);
    return rollout;
}

}  // namespace icrlab
