#pragma once

// Independent oracles for the mathematical core. Each oracle recomputes the compared
// quantity with its own code; production functions appear only as the thing under test.

#include "icrlab/core.hpp"
#include "icrlab/metrics.hpp"
#include "icrlab/tasks.hpp"

#include <string>
#include <vector>

namespace icrlab {

struct OracleReport {
    std::string name;
    long trials{0};
    double max_error{0.0};  // or the empirical estimate for Monte Carlo checks
    double tolerance{0.0};
    bool pass{false};
    bool inconclusive{false};
    std::string detail;
};

// "PASS name trials=... max_error=... tolerance=... detail"
std::string format_report(const OracleReport& report);

// Finite differences use h = 1e-5. Relative error per trial is
// max_k |analytic_k - numeric_k| / max(max_k |analytic_k|, max_k |numeric_k|, kGradientScaleFloor).
inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientScaleFloor = 1e-8;
inline constexpr double kClipBoundaryMargin = 1e-6;

OracleReport check_logprob_gradients(int trials, std::uint64_t seed = 1, int workers = 1);

// mode is Grpo or Icr (the latter with non-empty S(q) in every group).
OracleReport check_objective_gradients(ObjectiveMode mode, int batches, std::uint64_t seed = 1,
                                       int workers = 1);

// Log-prob (100 trials), grpo (50 batches) and icr (50 batches).
std::vector<OracleReport> check_gradients(int logprob_trials = 100, int batches = 50,
                                          std::uint64_t seed = 1, int workers = 1);

struct LengthLawReport {
    OracleReport report;
    double mean_correlation{0.0};
    double correlation_halfwidth{0.0};
    long defined_groups{0};
    double mean_gap_to_group{0.0};  // shortest correct length - group mean length
    double gap_halfwidth{0.0};
    double mean_gap_to_correct{0.0};  // shortest correct length - mean correct length
    long groups_with_correct{0};
    Regime regime{Regime::Neutral};
};

// 99% two-sided normal band.
inline constexpr double kBandZ = 2.5758293035489004;

// Decreasing law: asserts mean correlation < 0 and mean gap < 0 (upper band edges below 0).
// Constant law: asserts the band around the mean correlation contains 0; gap reported.
// Increasing law: asserts mean correlation > 0; gap reported.
LengthLawReport check_length_law(const GroupDistribution& dist, long n_groups, std::uint64_t seed = 1,
                          int workers = 1);

// group_correlation against a two-pass textbook Pearson on random groups, G in [2, 32].
OracleReport check_pearson(int trials, std::uint64_t seed = 1);

// Random (r, A) pairs against the min/clip formula and its branch derivative.
OracleReport check_surrogate_branches(int trials, std::uint64_t seed = 1);

// Everything the `check` subcommand runs, at default trial counts.
std::vector<OracleReport> run_oracle_suite(std::uint64_t seed = 1, int workers = 1);

}  // namespace icrlab
