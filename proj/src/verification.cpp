#include "icrlab/verification.hpp"

#include "icrlab/metrics.hpp"
#include "icrlab/objectives.hpp"
#include "icrlab/parallel.hpp"
#include "icrlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

namespace icrlab {

namespace {

// derive_stream_id kinds for the oracles.
constexpr std::uint64_t kLogprobKind = 16;
constexpr std::uint64_t kObjectiveKind = 17;
constexpr std::uint64_t kLengthLawKind = 18;
constexpr std::uint64_t kPearsonKind = 19;
constexpr std::uint64_t kSurrogateKind = 20;

double uniform_in(RandomStream& s, double lo, double hi) { return lo + (hi - lo) * s.uniform(); }

int int_in(RandomStream& s, int lo, int hi)
{
    return lo + static_cast<int>(s.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// ---------------------------------------------------------------- oracle maths

// log softmax(z / T)[token], straight from the definition.
double oracle_logprob(std::span<const double> weights, int dim, int vocab, const FeatureVector& f,
                      int token, double temperature)
{
    std::vector<double> z(static_cast<std::size_t>(vocab));
    for (int v = 0; v < vocab; ++v) {
        double s = 0.0;
        for (const int j : f.active) {
            s += weights[static_cast<std::size_t>(v * dim + j)];
        }
        z[static_cast<std::size_t>(v)] = s / temperature;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (const double x : z) {
        sum += std::exp(x - m);
    }
    return z[static_cast<std::size_t>(token)] - m - std::log(sum);
}

struct ToyBatch {
    TaskSpec task;
    FeatureLayout layout;
    std::vector<RolloutGroup> groups;
    std::vector<std::vector<FeatureVector>> feats;  // flattened per rollout
};

struct OracleValue {
    double value{0.0};
    std::vector<int> sides;  // per token: -1 below the band, 0 inside, +1 above
    double boundary_distance{std::numeric_limits<double>::infinity()};
};

OracleValue oracle_objective(const ToyBatch& batch, std::span<const double> weights,
                             ObjectiveMode mode, double clip_low, double clip_high, double alpha0,
                             double temperature)
{
    const double lo = 1.0 - clip_low;
    const double hi = 1.0 + clip_high;
    const bool grpo = mode != ObjectiveMode::OnlyRegularizer;
    const bool reg = mode == ObjectiveMode::Icr || mode == ObjectiveMode::IcrLpf ||
                     mode == ObjectiveMode::OnlyRegularizer;
    const double n = static_cast<double>(batch.groups.size());

    OracleValue out;
    double grpo_total = 0.0;
    double reg_total = 0.0;
    std::size_t flat = 0;
    for (const auto& group : batch.groups) {
        const double G = static_cast<double>(group.rollouts.size());
        const double alpha =
            group.shortest_correct.empty() ? 0.0 : alpha0 * n / static_cast<double>(group.shortest_correct.size());
        double grpo_g = 0.0;
        double reg_g = 0.0;
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
            const auto& r = group.rollouts[i];
            const auto& feats = batch.feats[flat++];
            const bool in_set = std::find(group.shortest_correct.begin(), group.shortest_correct.end(),
                                          static_cast<int>(i)) != group.shortest_correct.end();
            double g_sum = 0.0;
            double r_sum = 0.0;
            for (std::size_t t = 0; t < feats.size(); ++t) {
                const double lp = oracle_logprob(weights, batch.layout.dim(), batch.layout.vocab, feats[t],
                                                 r.tokens[t].value, temperature);
                const double ratio = std::exp(lp - r.old_logprobs[t]);
                out.sides.push_back(ratio < lo ? -1 : (ratio > hi ? 1 : 0));
                out.boundary_distance =
                    std::min({out.boundary_distance, std::abs(ratio - lo), std::abs(ratio - hi)});
                const double clipped = std::min(std::max(ratio, lo), hi);
                const double a = group.advantages[i];
                g_sum += std::min(ratio * a, clipped * a);
                r_sum += std::min(ratio, clipped);
            }
            const double w = 1.0 / (G * static_cast<double>(r.length));
            grpo_g += w * g_sum;
            if (in_set) {
                reg_g += w * r_sum;
            }
        }
        grpo_total += grpo_g;
        reg_total += alpha * reg_g;
    }
    out.value = (grpo ? grpo_total / n : 0.0) + (reg ? reg_total / n : 0.0);
    return out;
}

// Relative error of two gradient vectors over the coordinates in `use`.
double relative_error(std::span<const double> analytic, std::span<const double> numeric,
                      const std::vector<char>& use)
{
    double diff = 0.0;
    double scale = kGradientScaleFloor;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        if (!use[k]) {
            continue;
        }
        diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
        scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
    }
    return diff / scale;
}

// Two-pass textbook Pearson; nullopt when either variable has zero variance.
std::optional<double> two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    if (x.size() < 2) {
        return std::nullopt;
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nullopt;
    }
    return sxy / std::sqrt(sxx * syy);
}

ToyBatch make_toy_batch(RandomStream& rng, ObjectiveMode mode, std::vector<double>& weights)
{
    ToyBatch batch;
    batch.task = TaskSpec{10, 2, 8};
    batch.layout = FeatureLayout::for_task(batch.task, 4);
    const auto size = static_cast<std::size_t>(batch.layout.param_count());
    weights.assign(size, 0.0);
    for (auto& w : weights) {
        w = uniform_in(rng, -1.0, 1.0);
    }
    // Rollouts come from a nearby "old" policy so ratios spread across the clip band.
    std::vector<double> old = weights;
    for (auto& w : old) {
        w += uniform_in(rng, -0.15, 0.15);
    }
    const PolicySnapshot snapshot{PolicyParams(batch.layout, old)};
    const SamplingOptions options{1.0, 1.0};

    for (int g = 0; g < 2; ++g) {
        RolloutGroup group;
        group.query = sample_query(batch.task, rng, g);
        for (int i = 0; i < 4; ++i) {
            auto r = sample_rollout(snapshot, batch.task, group.query, options, rng);
            r.correct = rng.uniform() < 0.5;
            group.rollouts.push_back(std::move(r));
            group.advantages.push_back(uniform_in(rng, -2.0, 2.0));
        }
        if (mode == ObjectiveMode::Icr) {
            // Force a non-empty correct set, then take the argmin over correct lengths.
            group.rollouts[static_cast<std::size_t>(rng.below(4))].correct = true;
            int best = std::numeric_limits<int>::max();
            for (const auto& r : group.rollouts) {
                if (r.correct) {
                    best = std::min(best, r.length);
                }
            }
            for (int i = 0; i < 4; ++i) {
                const auto& r = group.rollouts[static_cast<std::size_t>(i)];
                if (r.correct && r.length == best) {
                    group.shortest_correct.push_back(i);
                }
            }
        }
        for (const auto& r : group.rollouts) {
            batch.feats.push_back(response_features(batch.layout, batch.task, group.query, r.tokens));
        }
        batch.groups.push_back(std::move(group));
    }
    return batch;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

std::string format_report(const OracleReport& r)
{
    std::string line = r.inconclusive ? "INCONCLUSIVE " : (r.pass ? "PASS " : "FAIL ");
    line += r.name;
    line += " trials=" + std::to_string(r.trials);
    line += " max_error=" + fmt(r.max_error);
    line += " tolerance=" + fmt(r.tolerance);
    if (!r.detail.empty()) {
        line += " " + r.detail;
    }
    return line;
}

// ---------------------------------------------------------------- gradients

OracleReport check_logprob_gradients(int trials, std::uint64_t seed, int workers)
{
    OracleReport report{"logprob_gradient", trials, 0.0, 1e-5, false, false, {}};
    std::vector<double> errors(static_cast<std::size_t>(trials), 0.0);
    parallel_for(trials, workers, [&](int trial) {
        auto rng = seeded_stream(seed, derive_stream_id(kLogprobKind, static_cast<std::uint64_t>(trial)));
        const TaskSpec task{int_in(rng, 2, 10), int_in(rng, 1, 3), int_in(rng, 4, 32)};
        const auto layout = FeatureLayout::for_task(task, int_in(rng, 1, 8));
        std::vector<double> w(static_cast<std::size_t>(layout.param_count()));
        for (auto& x : w) {
            x = uniform_in(rng, -2.0, 2.0);
        }
        const PolicyParams params(layout, w);
        const auto query = sample_query(task, rng, trial);
        TokenSeq prefix;
        const int position = int_in(rng, 0, task.length_budget - 1);
        for (int p = 0; p < position; ++p) {
            prefix.emplace_back(int_in(rng, 0, task.vocab_size() - 1));
        }
        const auto f = features(layout, task, query, prefix, position);
        const int token = int_in(rng, 0, task.vocab_size() - 1);
        const double temperature = uniform_in(rng, 0.5, 2.0);

        const auto analytic = grad_logprob(params, f, TokenId{token}, temperature);
        std::vector<double> numeric(w.size(), 0.0);
        const double h = kFiniteDifferenceStep;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double keep = w[k];
            w[k] = keep + h;
            const double up = oracle_logprob(w, layout.dim(), layout.vocab, f, token, temperature);
            w[k] = keep - h;
            const double down = oracle_logprob(w, layout.dim(), layout.vocab, f, token, temperature);
            w[k] = keep;
            numeric[k] = (up - down) / (2.0 * h);
        }
        const std::vector<char> all(w.size(), 1);
        double err = relative_error(analytic, numeric, all);
        // The value itself must agree with the oracle too.
        const double value_gap =
            std::abs(token_logprob(params, f, TokenId{token}, temperature) -
                     oracle_logprob(w, layout.dim(), layout.vocab, f, token, temperature));
        errors[static_cast<std::size_t>(trial)] = std::max(err, value_gap);
    });
    report.max_error = *std::max_element(errors.begin(), errors.end());
    report.pass = report.max_error <= report.tolerance;
    return report;
}

OracleReport check_objective_gradients(ObjectiveMode mode, int batches, std::uint64_t seed, int workers)
{
    const bool icr = mode == ObjectiveMode::Icr;
    OracleReport report{icr ? "icr_gradient" : "grpo_gradient", batches, 0.0, 1e-4, false, false, {}};
    constexpr double clip = 0.2;
    constexpr double alpha0 = 0.5;
    constexpr double temperature = 1.0;

    std::vector<double> errors(static_cast<std::size_t>(batches), 0.0);
    std::vector<long> skipped(static_cast<std::size_t>(batches), 0);
    parallel_for(batches, workers, [&](int b) {
        auto rng = seeded_stream(seed, derive_stream_id(kObjectiveKind, icr ? 1 : 0, static_cast<std::uint64_t>(b)));
        std::vector<double> w;
        const auto batch = make_toy_batch(rng, mode, w);
        const PolicyParams params(batch.layout, w);

        TrainConfig config;
        config.objective_mode = mode;
        config.clip_low = clip;
        config.clip_high = clip;
        config.alpha0 = alpha0;
        config.sample_temperature = temperature;
        const auto ctx = LossContext::from_config(batch.task, params, config);
        const auto loss = objective_and_grad(batch.groups, ctx);

        const auto base = oracle_objective(batch, w, mode, clip, clip, alpha0, temperature);
        double err = std::abs(loss.objective - base.value);

        std::vector<double> numeric(w.size(), 0.0);
        std::vector<char> use(w.size(), 1);
        const double h = kFiniteDifferenceStep;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double keep = w[k];
            w[k] = keep + h;
            const auto up = oracle_objective(batch, w, mode, clip, clip, alpha0, temperature);
            w[k] = keep - h;
            const auto down = oracle_objective(batch, w, mode, clip, clip, alpha0, temperature);
            w[k] = keep;
            if (up.sides != down.sides || up.sides != base.sides ||
                std::min({up.boundary_distance, down.boundary_distance, base.boundary_distance}) <
                    kClipBoundaryMargin) {
                use[k] = 0;
                ++skipped[static_cast<std::size_t>(b)];
                continue;
            }
            numeric[k] = (up.value - down.value) / (2.0 * h);
        }
        err = std::max(err, relative_error(loss.gradient, numeric, use));
        errors[static_cast<std::size_t>(b)] = err;
    });
    report.max_error = *std::max_element(errors.begin(), errors.end());
    long total_skipped = 0;
    for (const long s : skipped) {
        total_skipped += s;
    }
    report.detail = "skipped_coordinates=" + std::to_string(total_skipped);
    report.pass = report.max_error <= report.tolerance;
    return report;
}

std::vector<OracleReport> check_gradients(int logprob_trials, int batches, std::uint64_t seed, int workers)
{
    return {
        check_logprob_gradients(logprob_trials, seed, workers),
        check_objective_gradients(ObjectiveMode::Grpo, batches, seed, workers),
        check_objective_gradients(ObjectiveMode::Icr, batches, seed, workers),
    };
}

// ---------------------------------------------------------------- length laws

LengthLawReport check_length_law(const GroupDistribution& dist, long n_groups, std::uint64_t seed, int workers)
{
    constexpr long kChunk = 1000;
    const long chunks = (n_groups + kChunk - 1) / kChunk;

    struct Sums {
        double corr{0.0};
        double corr_sq{0.0};
        long defined{0};
        double gap{0.0};
        double gap_sq{0.0};
        double gap_correct{0.0};
        long with_correct{0};
    };
    std::vector<Sums> partial(static_cast<std::size_t>(chunks));
    parallel_for(static_cast<int>(chunks), workers, [&](int c) {
        auto rng = seeded_stream(seed, derive_stream_id(kLengthLawKind, static_cast<std::uint64_t>(c)));
        auto& s = partial[static_cast<std::size_t>(c)];
        const long begin = c * kChunk;
        const long end = std::min(n_groups, begin + kChunk);
        std::vector<double> x;
        std::vector<double> y;
        for (long g = begin; g < end; ++g) {
            const auto group = sample_synthetic_group(dist, rng);
            x.clear();
            y.clear();
            double mean_len = 0.0;
            double correct_len = 0.0;
            int correct = 0;
            int shortest = std::numeric_limits<int>::max();
            for (const auto& sample : group) {
                x.push_back(sample.length);
                y.push_back(sample.correct ? 1.0 : 0.0);
                mean_len += sample.length;
                if (sample.correct) {
                    ++correct;
                    correct_len += sample.length;
                    shortest = std::min(shortest, sample.length);
                }
            }
            mean_len /= static_cast<double>(group.size());
            if (const auto r = two_pass_pearson(x, y)) {
                s.corr += *r;
                s.corr_sq += *r * *r;
                ++s.defined;
            }
            if (correct > 0) {
                const double gap = shortest - mean_len;
                s.gap += gap;
                s.gap_sq += gap * gap;
                s.gap_correct += shortest - correct_len / correct;
                ++s.with_correct;
            }
        }
    });

    Sums total;
    for (const auto& s : partial) {
        total.corr += s.corr;
        total.corr_sq += s.corr_sq;
        total.defined += s.defined;
        total.gap += s.gap;
        total.gap_sq += s.gap_sq;
        total.gap_correct += s.gap_correct;
        total.with_correct += s.with_correct;
    }

    auto band = [](double sum, double sum_sq, long n) {
        const double mean = sum / static_cast<double>(n);
        const double var = n > 1 ? std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n - 1)) : 0.0;
        return std::pair{mean, kBandZ * std::sqrt(var / static_cast<double>(n))};
    };

    LengthLawReport out;
    out.report.name = "length_law";
    out.report.trials = n_groups;
    out.defined_groups = total.defined;
    out.groups_with_correct = total.with_correct;
    if (total.with_correct == 0 || total.defined < 2) {
        out.report.inconclusive = true;
        out.report.detail = "degenerate distribution: no usable groups";
        return out;
    }
    std::tie(out.mean_correlation, out.correlation_halfwidth) = band(total.corr, total.corr_sq, total.defined);
    std::tie(out.mean_gap_to_group, out.gap_halfwidth) = band(total.gap, total.gap_sq, total.with_correct);
    out.mean_gap_to_correct = total.gap_correct / static_cast<double>(total.with_correct);
    out.regime = classify_regime(out.mean_correlation, 0.0);

    const double slope = dist.correctness_law.slope;
    const double corr_hi = out.mean_correlation + out.correlation_halfwidth;
    const double corr_lo = out.mean_correlation - out.correlation_halfwidth;
    const double gap_hi = out.mean_gap_to_group + out.gap_halfwidth;
    if (slope < 0.0) {
        out.report.pass = corr_hi < 0.0 && gap_hi < 0.0;
    } else if (slope > 0.0) {
        out.report.pass = corr_lo > 0.0;
    } else {
        out.report.pass = corr_lo <= 0.0 && corr_hi >= 0.0;
    }
    out.report.max_error = out.mean_correlation;
    out.report.tolerance = out.correlation_halfwidth;
    out.report.detail = "mean_corr=" + fmt(out.mean_correlation) + "+-" + fmt(out.correlation_halfwidth) +
                        " gap_to_group=" + fmt(out.mean_gap_to_group) + "+-" + fmt(out.gap_halfwidth) +
                        " gap_to_correct_mean=" + fmt(out.mean_gap_to_correct) +
                        " regime=" + std::string(to_string(out.regime));
    return out;
}

// ---------------------------------------------------------------- pearson

OracleReport check_pearson(int trials, std::uint64_t seed)
{
    OracleReport report{"pearson", trials, 0.0, 1e-12, false, false, {}};
    auto rng = seeded_stream(seed, derive_stream_id(kPearsonKind));
    long undefined = 0;
    long disagreements = 0;
    for (int t = 0; t < trials; ++t) {
        const int g = int_in(rng, 2, 32);
        const double p = rng.uniform();
        // Every fourth group is made degenerate in one variable.
        const int kind = t % 4;
        std::vector<double> lengths;
        std::vector<int> correct;
        std::vector<double> y;
        for (int i = 0; i < g; ++i) {
            const int len = kind == 1 ? 17 : int_in(rng, 1, 64);
            const bool c = kind == 2 ? (p < 0.5) : rng.uniform() < p;
            lengths.push_back(len);
            correct.push_back(c ? 1 : 0);
            y.push_back(c ? 1.0 : 0.0);
        }
        const auto got = group_correlation(lengths, correct);
        const auto want = two_pass_pearson(lengths, y);
        if (got.has_value() != want.has_value()) {
            ++disagreements;
            continue;
        }
        if (!want) {
            ++undefined;
            continue;
        }
        report.max_error = std::max(report.max_error, std::abs(*got - *want));
    }
    report.pass = disagreements == 0 && report.max_error <= report.tolerance;
    report.detail = "undefined=" + std::to_string(undefined) + " definedness_mismatches=" + std::to_string(disagreements);
    return report;
}

// ---------------------------------------------------------------- surrogate

OracleReport check_surrogate_branches(int trials, std::uint64_t seed)
{
    OracleReport report{"surrogate_branches", trials, 0.0, 0.0, false, false, {}};
    auto rng = seeded_stream(seed, derive_stream_id(kSurrogateKind));
    long clipped_count = 0;
    for (int t = 0; t < trials; ++t) {
        const double eps_low = uniform_in(rng, 0.05, 0.5);
        const double eps_high = uniform_in(rng, 0.05, 0.5);
        double r = std::exp(uniform_in(rng, -1.0, 1.0));
        if (t % 10 == 0) {
            r = 1.0 - eps_low;
        } else if (t % 10 == 1) {
            r = 1.0 + eps_high;
        }
        const double a = t % 17 == 0 ? 0.0 : uniform_in(rng, -3.0, 3.0);

        const double lo = 1.0 - eps_low;
        const double hi = 1.0 + eps_high;
        const double c = r < lo ? lo : (r > hi ? hi : r);
        const double want = std::min(r * a, c * a);
        // The unclipped branch is active when it attains the minimum.
        const double want_grad = r * a <= c * a ? a : 0.0;
        const double reg_want = std::min(r, c);
        const double reg_grad = r <= c ? 1.0 : 0.0;

        const auto term = clipped_surrogate(r, a, eps_low, eps_high);
        const auto reg = regularizer_term(r, eps_low, eps_high);
        clipped_count += term.active_branch == SurrogateBranch::Clipped ? 1 : 0;
        report.max_error = std::max({report.max_error, std::abs(term.clipped_value - want),
                                     std::abs(term.ratio_gradient() - want_grad),
                                     std::abs(reg.value - reg_want), std::abs(reg.ratio_gradient - reg_grad)});
    }
    report.pass = report.max_error <= report.tolerance;
    report.detail = "clipped_branch_hits=" + std::to_string(clipped_count);
    return report;
}

// ---------------------------------------------------------------- suite

std::vector<OracleReport> run_oracle_suite(std::uint64_t seed, int workers)
{
    auto reports = check_gradients(100, 50, seed, workers);
    reports.push_back(check_pearson(10000, seed));
    reports.push_back(check_surrogate_branches(10000, seed));

    GroupDistribution dist;
    dist.length_law = LengthLaw{1, 64};
    dist.group_size = 8;
    dist.correctness_law = CorrectnessLaw::decreasing(64);
    auto law = check_length_law(dist, 100000, seed, workers);
    law.report.name = "length_law_decreasing";
    reports.push_back(law.report);

    dist.correctness_law = CorrectnessLaw::constant(0.5, 64);
    law = check_length_law(dist, 100000, seed, workers);
    law.report.name = "length_law_constant";
    reports.push_back(law.report);

    dist.correctness_law = CorrectnessLaw::increasing(64);
    law = check_length_law(dist, 100000, seed, workers);
    law.report.name = "length_law_increasing";
    reports.push_back(law.report);
    return reports;
}

}  // namespace icrlab
