// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "icrlab/objectives.hpp"
#include "icrlab/trainer.hpp"
#include "icrlab/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace icrlab;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kLogprobGradTol = 1e-5;
constexpr double kObjectiveGradTol = 1e-4;
constexpr double kGradientSeconds = 30.0;
constexpr double kAdvantageTol = 1e-10;
constexpr double kPearsonTol = 1e-12;
constexpr double kLengthLawSeconds = 60.0;
constexpr long kLengthLawGroups = 100000;
constexpr double kAccuracySlack = 0.02;
constexpr int kSeeds = 5;
constexpr int kRequiredSeeds = 4;
constexpr double kSuiteSeconds = 15 * 60.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail)
{
    std::printf("%s %2d %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++failures;
    }
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("icrlab_acceptance_" + name);
    fs::remove_all(dir);
    return dir;
}

// ---------------------------------------------------------------- 1

void gradient_fidelity()
{
    const auto t0 = Clock::now();
    const auto reports = check_gradients(100, 50);
    const double elapsed = seconds_since(t0);
    bool pass = elapsed < kGradientSeconds;
    std::string detail;
    for (const auto& r : reports) {
        const double tol = r.name.find("logprob") != std::string::npos ? kLogprobGradTol : kObjectiveGradTol;
        pass = pass && r.pass && r.max_error < tol;
        detail += r.name + " max_rel=" + fmt("%.2e", r.max_error) + " ";
    }
    report(1, "gradient fidelity", pass, detail + fmt("time=%.1fs", elapsed));
}

// ---------------------------------------------------------------- 2

void advantage_contract()
{
    auto s = seeded_stream(2, 200);
    double worst_mean = 0.0;
    double worst_std = 0.0;
    double worst_invariance = 0.0;
    bool zero_ok = true;
    int nonzero_groups = 0;
    for (int trial = 0; nonzero_groups < 10000; ++trial) {
        const int G = 2 + static_cast<int>(s.below(31));
        std::vector<double> r(static_cast<std::size_t>(G));
        const bool binary = trial % 2 == 0;
        for (auto& x : r) {
            x = binary ? static_cast<double>(s.below(2)) : 6.0 * s.uniform() - 3.0;
        }
        const auto adv = group_advantages(r);
        const bool constant = std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; });
        if (constant) {
            zero_ok = zero_ok && std::all_of(adv.begin(), adv.end(), [](double a) { return a == 0.0; });
            continue;
        }
        ++nonzero_groups;
        double mean = 0.0;
        for (double a : adv) {
            mean += a;
        }
        mean /= G;
        double var = 0.0;
        for (double a : adv) {
            var += (a - mean) * (a - mean);
        }
        worst_mean = std::max(worst_mean, std::abs(mean));
        worst_std = std::max(worst_std, std::abs(std::sqrt(var / G) - 1.0));

        const double shift = 20.0 * s.uniform() - 10.0;
        const double scale = 0.1 + 10.0 * s.uniform();
        std::vector<double> moved;
        for (double x : r) {
            moved.push_back(scale * x + shift);
        }
        const auto adv_moved = group_advantages(moved);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            worst_invariance = std::max(worst_invariance, std::abs(adv[i] - adv_moved[i]));
        }
    }
    // Explicit zero-variance groups.
    for (double v : {0.0, 1.0, -2.5}) {
        const std::vector<double> flat(8, v);
        const auto adv = group_advantages(flat);
        zero_ok = zero_ok && std::all_of(adv.begin(), adv.end(), [](double a) { return a == 0.0; });
    }
    const bool pass =
        worst_mean < kAdvantageTol && worst_std < kAdvantageTol && worst_invariance < kAdvantageTol && zero_ok;
    report(2, "advantage contract", pass,
           fmt("|mean|<=%.1e |std-1|<=%.1e invariance<=%.1e", worst_mean, worst_std, worst_invariance) +
               (zero_ok ? " zero-variance=exact" : " zero-variance=WRONG"));
}

// ---------------------------------------------------------------- 3

void correlation_oracle()
{
    const auto r = check_pearson(10000, 3);
    report(3, "correlation oracle", r.pass && r.max_error <= kPearsonTol,
           fmt("groups=10000 max_abs_diff=%.2e ", r.max_error) + r.detail);
}

// ---------------------------------------------------------------- 4

void length_law_monte_carlo()
{
    GroupDistribution dist;
    dist.correctness_law = CorrectnessLaw::decreasing(64);
    dist.group_size = 8;
    const auto t0 = Clock::now();
    const auto r = check_length_law(dist, kLengthLawGroups, 4);
    const double elapsed = seconds_since(t0);
    const bool pass = r.mean_correlation + r.correlation_halfwidth < 0.0 &&
                      r.mean_gap_to_group + r.gap_halfwidth < 0.0 && elapsed < kLengthLawSeconds;
    report(4, "length-law monte carlo", pass,
           fmt("corr=%.4f+-%.4f ", r.mean_correlation, r.correlation_halfwidth) +
               fmt("gap=%.3f+-%.3f time=%.1fs", r.mean_gap_to_group, r.gap_halfwidth, elapsed));
}

// ---------------------------------------------------------------- 5

void selection_rule()
{
    long cases = 0;
    long mismatches = 0;
    long ties = 0;
    long empty = 0;
    for (int G = 1; G <= 4; ++G) {
        // Non-decreasing length tuples enumerate the multisets; every ordering of a multiset
        // is reached through the correctness masks applied to each permutation.
        std::vector<int> lengths(static_cast<std::size_t>(G), 1);
        std::function<void(int, int)> each_multiset = [&](int pos, int lo) {
            if (pos == G) {
                auto perm = lengths;
                do {
                    for (int mask = 0; mask < (1 << G); ++mask) {
                        std::vector<Rollout> group(static_cast<std::size_t>(G));
                        int best = 1 << 30;
                        for (int i = 0; i < G; ++i) {
                            auto& r = group[static_cast<std::size_t>(i)];
                            r.length = perm[static_cast<std::size_t>(i)];
                            r.correct = ((mask >> i) & 1) != 0;
                            if (r.correct) {
                                best = std::min(best, r.length);
                            }
                        }
                        std::vector<int> want;
                        for (int i = 0; i < G; ++i) {
                            const auto& r = group[static_cast<std::size_t>(i)];
                            if (r.correct && r.length == best) {
                                want.push_back(i);
                            }
                        }
                        ties += want.size() > 1 ? 1 : 0;
                        empty += want.empty() ? 1 : 0;
                        mismatches += shortest_correct_set(group, SelectionVariant::ShortestCorrect) == want ? 0 : 1;
                        ++cases;
                    }
                } while (std::next_permutation(perm.begin(), perm.end()));
                return;
            }
            for (int l = lo; l <= 5; ++l) {
                lengths[static_cast<std::size_t>(pos)] = l;
                each_multiset(pos + 1, l);
            }
        };
        each_multiset(0, 1);
    }
    report(5, "selection rule", mismatches == 0 && ties > 0 && empty > 0,
           "cases=" + std::to_string(cases) + " mismatches=" + std::to_string(mismatches) +
               " tie_cases=" + std::to_string(ties) + " empty_cases=" + std::to_string(empty));
}

// ---------------------------------------------------------------- 6

void baseline_equivalence()
{
    // Budget 2 cannot hold ANSWER d EOS, so S(q) is empty in every group.
    auto empty_s = [](ObjectiveMode mode) {
        TrainConfig c;
        c.steps = 60;
        c.length_budget = 2;
        c.lpf_lmin = 0;
        c.lpf_lmax = 2;
        c.lambda = 1.0;
        c.init_think_bias = 0.0;
        c.init_format_skill = 0.0;
        c.objective_mode = mode;
        return c;
    };
    const auto grpo_a = run(empty_s(ObjectiveMode::Grpo));
    const auto icr_a = run(empty_s(ObjectiveMode::Icr));
    const auto grpo_lpf_a = run(empty_s(ObjectiveMode::GrpoLpf));
    const auto icr_lpf_a = run(empty_s(ObjectiveMode::IcrLpf));
    const bool moved = !(grpo_lpf_a.state.params == initial_state(empty_s(ObjectiveMode::GrpoLpf)).params);
    const bool a = icr_a.state.params == grpo_a.state.params && icr_a.records == grpo_a.records &&
                   icr_lpf_a.state.params == grpo_lpf_a.state.params && moved;

    TrainConfig base;
    const auto grpo = run(base);
    bool b = true;
    for (auto mode : {ObjectiveMode::GrpoLpf, ObjectiveMode::GrpoLpg}) {
        auto c = base;
        c.objective_mode = mode;
        c.lambda = 0.0;
        const auto shaped = run(c);
        b = b && shaped.state.params == grpo.state.params && shaped.records == grpo.records;
    }
    report(6, "baseline equivalence", a && b,
           std::string("(a) empty S(q) icr==grpo: ") + (a ? "bit-identical" : "DIFFERS") +
               "; (b) lambda=0 lpf/lpg==grpo over 300 steps: " + (b ? "bit-identical" : "DIFFERS"));
}

// ---------------------------------------------------------------- 7-11

struct Summary {
    double final_length{0.0};  // mean over the last 10% of steps
    double final_pi_s{0.0};
    double first_correlation{0.0};
    double last_correlation{0.0};
    double eval_accuracy{0.0};  // at the final step
};

// Steps whose batch correlation is undefined are left out of the window average; a window
// with no defined value counts as 0.
Summary summarize_run(const RunResult& r)
{
    const int n = static_cast<int>(r.records.size());
    const int w = std::max(1, n / 10);
    auto window = [&](int from, int to, auto value) {
        double sum = 0.0;
        int count = 0;
        for (int i = from; i < to; ++i) {
            if (const std::optional<double> v = value(r.records[static_cast<std::size_t>(i)])) {
                sum += *v;
                ++count;
            }
        }
        return count > 0 ? sum / count : 0.0;
    };
    Summary s;
    s.final_length = window(n - w, n, [](const StepRecord& x) { return std::optional<double>(x.mean_length); });
    s.final_pi_s = window(n - w, n, [](const StepRecord& x) { return x.pi_s_mean_length; });
    s.first_correlation = window(0, w, [](const StepRecord& x) { return x.batch_correlation; });
    s.last_correlation = window(n - w, n, [](const StepRecord& x) { return x.batch_correlation; });
    s.eval_accuracy = r.records.back().eval_accuracy.value_or(0.0);
    return s;
}

Summary train(ObjectiveMode mode, double lambda, SelectionVariant variant, std::uint64_t seed)
{
    TrainConfig c;
    c.objective_mode = mode;
    c.lambda = lambda;
    c.selection_variant = variant;
    c.seed = seed;
    return summarize_run(run(c));
}

std::string seeds_line(const std::vector<double>& lhs, const std::vector<double>& rhs, const char* f)
{
    std::string out;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        out += fmt(f, lhs[i], rhs[i]);
        out += i + 1 == lhs.size() ? "" : " ";
    }
    return out;
}

void directional_dynamics()
{
    const auto sc = SelectionVariant::ShortestCorrect;
    std::vector<Summary> lpg2, lpg05, lpg1, grpo, icr, all, only;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const auto s = static_cast<std::uint64_t>(seed);
        lpg2.push_back(train(ObjectiveMode::GrpoLpg, 2.0, sc, s));
        lpg05.push_back(train(ObjectiveMode::GrpoLpg, 0.5, sc, s));
        lpg1.push_back(train(ObjectiveMode::GrpoLpg, 1.0, sc, s));
        grpo.push_back(train(ObjectiveMode::Grpo, 0.0, sc, s));
        icr.push_back(train(ObjectiveMode::Icr, 0.0, sc, s));
        all.push_back(train(ObjectiveMode::Icr, 0.0, SelectionVariant::AllSamples, s));
        only.push_back(train(ObjectiveMode::OnlyRegularizer, 0.0, sc, s));
    }
    auto count = [](int n, auto pred) {
        int k = 0;
        for (int i = 0; i < n; ++i) {
            k += pred(static_cast<std::size_t>(i)) ? 1 : 0;
        }
        return k;
    };
    auto column = [](const std::vector<Summary>& runs, double Summary::*field) {
        std::vector<double> out;
        for (const auto& r : runs) {
            out.push_back(r.*field);
        }
        return out;
    };
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return s / static_cast<double>(v.size());
    };

    {
        const int k = count(kSeeds, [&](std::size_t i) { return lpg2[i].final_length <= lpg05[i].final_length; });
        report(7, "compression speed (lpg lambda 2 vs 0.5)", k >= kRequiredSeeds,
               std::to_string(k) + "/5 seeds; length(2)/length(0.5): " +
                   seeds_line(column(lpg2, &Summary::final_length), column(lpg05, &Summary::final_length),
                              "%.2f/%.2f"));
    }
    {
        const int k =
            count(kSeeds, [&](std::size_t i) { return lpg1[i].last_correlation > lpg1[i].first_correlation; });
        report(8, "correlation drift (lpg lambda 1)", k >= kRequiredSeeds,
               std::to_string(k) + "/5 seeds; first->last 10%: " +
                   seeds_line(column(lpg1, &Summary::first_correlation), column(lpg1, &Summary::last_correlation),
                              "%.3f->%.3f"));
    }
    {
        const auto pis = column(icr, &Summary::final_pi_s);
        const auto icr_len = column(icr, &Summary::final_length);
        const auto grpo_len = column(grpo, &Summary::final_length);
        const int k1 = count(kSeeds, [&](std::size_t i) { return pis[i] <= icr_len[i]; });
        const int k2 = count(kSeeds, [&](std::size_t i) { return icr_len[i] <= grpo_len[i]; });
        const bool averaged = mean(pis) <= mean(icr_len) && mean(icr_len) <= mean(grpo_len);
        report(9, "icr ordering pi_s <= icr <= grpo", k1 >= kRequiredSeeds && k2 >= kRequiredSeeds && averaged,
               fmt("means %.2f <= %.2f <= %.2f; ", mean(pis), mean(icr_len), mean(grpo_len)) +
                   std::to_string(k1) + "/5 and " + std::to_string(k2) + "/5 seeds");
    }
    {
        const auto icr_acc = column(icr, &Summary::eval_accuracy);
        const auto grpo_acc = column(grpo, &Summary::eval_accuracy);
        const int k1 = count(kSeeds, [&](std::size_t i) { return icr_acc[i] >= grpo_acc[i] - kAccuracySlack; });
        const int k2 = count(kSeeds, [&](std::size_t i) { return icr[i].final_length < grpo[i].final_length; });
        report(10, "accuracy preservation", k1 >= kRequiredSeeds && k2 >= kRequiredSeeds,
               std::to_string(k1) + "/5 accuracy, " + std::to_string(k2) + "/5 shorter; eval acc icr/grpo: " +
                   seeds_line(icr_acc, grpo_acc, "%.3f/%.3f"));
    }
    {
        const auto all_len = column(all, &Summary::final_length);
        const auto icr_len = column(icr, &Summary::final_length);
        const auto only_acc = column(only, &Summary::eval_accuracy);
        const auto icr_acc = column(icr, &Summary::eval_accuracy);
        const int k1 = count(kSeeds, [&](std::size_t i) { return all_len[i] > icr_len[i]; });
        const int k2 = count(kSeeds, [&](std::size_t i) { return only_acc[i] < icr_acc[i]; });
        report(11, "ablation direction", k1 >= kRequiredSeeds && k2 >= kRequiredSeeds,
               std::to_string(k1) + "/5 all-samples longer (" + seeds_line(all_len, icr_len, "%.2f/%.2f") + "), " +
                   std::to_string(k2) + "/5 only-regularizer less accurate (" +
                   seeds_line(only_acc, icr_acc, "%.3f/%.3f") + ")");
    }
}

// ---------------------------------------------------------------- 12

void determinism(Clock::time_point suite_start)
{
    TrainConfig c;
    c.objective_mode = ObjectiveMode::Icr;
    c.seed = 11;
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    run(c, {.out_dir = a});
    run(c, {.out_dir = b});
    const bool replay = read_file(a / "metrics.jsonl") == read_file(b / "metrics.jsonl") &&
                        !read_file(a / "metrics.jsonl").empty();

    // Interrupted at step 60; the latest checkpoint is step 50 and steps 51..300 are replayed.
    const auto r = fresh_dir("det_resume");
    run(c, {.out_dir = r, .stop_after = 60});
    run(c, {.out_dir = r, .resume = true});
    const bool resume = read_file(r / "metrics.jsonl") == read_file(a / "metrics.jsonl") &&
                        read_file(checkpoint_path(r, 300)) == read_file(checkpoint_path(a, 300));

    const double elapsed = seconds_since(suite_start);
    report(12, "determinism", replay && resume && elapsed < kSuiteSeconds,
           std::string("replay ") + (replay ? "byte-identical" : "DIFFERS") + ", resume " +
               (resume ? "byte-identical" : "DIFFERS") + fmt(", suite time %.0fs", elapsed));
    for (const auto& d : {a, b, r}) {
        fs::remove_all(d);
    }
}

}  // namespace

int main()
{
    const auto start = Clock::now();
    try {
        gradient_fidelity();
        advantage_contract();
        correlation_oracle();
        length_law_monte_carlo();
        selection_rule();
        baseline_equivalence();
        directional_dynamics();
        determinism(start);
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
