#include "icrlab/verification.hpp"

#include <gtest/gtest.h>

using namespace icrlab;

TEST(Oracles, LogprobGradients)
{
    const auto r = check_logprob_gradients(20, 3);
    EXPECT_TRUE(r.pass) << format_report(r);
    EXPECT_EQ(r.trials, 20);
    EXPECT_LT(r.max_error, 1e-5);
}

TEST(Oracles, ObjectiveGradients)
{
    for (auto mode : {ObjectiveMode::Grpo, ObjectiveMode::Icr}) {
        const auto r = check_objective_gradients(mode, 10, 4);
        EXPECT_TRUE(r.pass) << format_report(r);
        EXPECT_LT(r.max_error, 1e-4);
    }
}

TEST(Oracles, GradientChecksIgnoreWorkerCount)
{
    const auto a = check_objective_gradients(ObjectiveMode::Icr, 5, 9, 1);
    const auto b = check_objective_gradients(ObjectiveMode::Icr, 5, 9, 3);
    EXPECT_EQ(a.max_error, b.max_error);
}

TEST(Oracles, PearsonAndSurrogate)
{
    const auto p = check_pearson(2000, 5);
    EXPECT_TRUE(p.pass) << format_report(p);
    const auto s = check_surrogate_branches(2000, 5);
    EXPECT_TRUE(s.pass) << format_report(s);
}

TEST(LengthLaw, DecreasingLawGivesNegativeCorrelationAndGap)
{
    GroupDistribution dist;
    dist.correctness_law = CorrectnessLaw::decreasing(64);
    const auto r = check_length_law(dist, 20000, 6);
    EXPECT_TRUE(r.report.pass) << format_report(r.report);
    EXPECT_LT(r.mean_correlation + r.correlation_halfwidth, 0.0);
    EXPECT_LT(r.mean_gap_to_group + r.gap_halfwidth, 0.0);
    EXPECT_EQ(r.regime, Regime::Overthinking);
}

TEST(LengthLaw, IncreasingAndConstantLaws)
{
    GroupDistribution dist;
    dist.correctness_law = CorrectnessLaw::increasing(64);
    const auto up = check_length_law(dist, 20000, 7);
    EXPECT_TRUE(up.report.pass) << format_report(up.report);
    EXPECT_GT(up.mean_correlation, 0.0);
    EXPECT_EQ(up.regime, Regime::Underthinking);

    dist.correctness_law = CorrectnessLaw::constant(0.5, 64);
    const auto flat = check_length_law(dist, 20000, 8);
    EXPECT_TRUE(flat.report.pass) << format_report(flat.report);
    EXPECT_LT(std::abs(flat.mean_correlation), flat.correlation_halfwidth);
}

TEST(LengthLaw, NoUsableGroupsIsInconclusive)
{
    GroupDistribution dist;
    dist.correctness_law = CorrectnessLaw::constant(0.0, 64);
    const auto r = check_length_law(dist, 1000, 9);
    EXPECT_TRUE(r.report.inconclusive);
    EXPECT_FALSE(r.report.pass);
    EXPECT_EQ(r.defined_groups, 0);
}

TEST(FormatReport, OneLineWithVerdict)
{
    OracleReport r{"demo", 10, 1e-7, 1e-5, true, false, "ok"};
    const auto line = format_report(r);
    EXPECT_EQ(line.rfind("PASS demo", 0), 0u) << line;
    EXPECT_EQ(line.find('\n'), std::string::npos);
    r.pass = false;
    EXPECT_EQ(format_report(r).rfind("FAIL", 0), 0u);
}
