#include "icrlab/core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace icrlab;

TEST(RandomStream, SameSeedAndStreamGiveSameDraws)
{
    auto a = seeded_stream(7, 0);
    auto b = seeded_stream(7, 0);
    for (int i = 0; i < 100; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64()) << "draw " << i;
    }
}

TEST(RandomStream, DifferentStreamIdsDiffer)
{
    auto a = seeded_stream(7, 0);
    auto b = seeded_stream(7, 1);
    int same = 0;
    for (int i = 0; i < 100; ++i) {
        same += a.next_u64() == b.next_u64() ? 1 : 0;
    }
    EXPECT_EQ(same, 0);
}

TEST(RandomStream, SerializeRoundTripContinuesIdentically)
{
    auto s = seeded_stream(7, 3);
    for (int i = 0; i < 37; ++i) {
        s.next_u64();
    }
    auto restored = RandomStream::deserialize(s.serialize());
    EXPECT_EQ(restored, s);
    for (int i = 0; i < 100; ++i) {
        ASSERT_EQ(restored.next_u64(), s.next_u64());
    }
}

TEST(RandomStream, DeserializeRejectsGarbage)
{
    EXPECT_THROW(RandomStream::deserialize("not a stream"), CheckpointError);
}

TEST(RandomStream, UniformInUnitInterval)
{
    auto s = seeded_stream(1, 2);
    double sum = 0.0;
    constexpr int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    // mean of U(0,1) has sd 1/sqrt(12 n)
    EXPECT_NEAR(sum / n, 0.5, 4.0 / std::sqrt(12.0 * n));
}

TEST(RandomStream, BelowStaysInRangeAndCoversIt)
{
    auto s = seeded_stream(3, 4);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = s.below(7);
        ASSERT_LT(v, 7u);
        ++counts[v];
    }
    for (int c : counts) {
        EXPECT_GT(c, 800);
        EXPECT_LT(c, 1200);
    }
}

TEST(RandomStream, ShuffleIsAPermutation)
{
    auto s = seeded_stream(9, 9);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    s.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
    }
}

TEST(RandomStream, DeriveStreamIdSeparatesTuples)
{
    EXPECT_NE(derive_stream_id(2, 1, 0), derive_stream_id(2, 0, 1));
    EXPECT_NE(derive_stream_id(1), derive_stream_id(2));
    EXPECT_EQ(derive_stream_id(4, 5, 6), derive_stream_id(4, 5, 6));
}

// ---------------------------------------------------------------- config

TEST(Config, DesktopDefaults)
{
    const TrainConfig c;
    EXPECT_EQ(c.group_size, 8);
    EXPECT_EQ(c.batch_queries, 32);
    EXPECT_DOUBLE_EQ(c.clip_low, 0.2);
    EXPECT_DOUBLE_EQ(c.clip_high, 0.2);
    EXPECT_DOUBLE_EQ(c.sample_temperature, 1.0);
    EXPECT_EQ(c.length_budget, 64);
    EXPECT_EQ(c.lpf_lmin, 24);
    EXPECT_EQ(c.lpf_lmax, 48);
    EXPECT_DOUBLE_EQ(c.alpha0, 0.5);
    EXPECT_DOUBLE_EQ(c.learning_rate, 0.05);
    EXPECT_DOUBLE_EQ(c.eval_temperature, 0.1);
    EXPECT_DOUBLE_EQ(c.eval_top_p, 0.95);
    EXPECT_EQ(c.eval_every, 10);
    EXPECT_EQ(c.steps, 300);
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, ValidateRejectsEachBrokenInvariant)
{
    auto broken = [](auto edit) {
        TrainConfig c;
        edit(c);
        return c;
    };
    EXPECT_THROW(validate(broken([](auto& c) { c.group_size = 1; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.clip_low = 0.0; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.clip_high = 1.0; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.lpf_lmin = 48; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.lpf_lmax = 65; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.lambda = -0.1; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.alpha0 = -1.0; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.minibatch_size = 12; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.minibatch_size = 48; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.momentum = 1.0; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.sample_temperature = 0.0; })), ConfigError);
    EXPECT_THROW(validate(broken([](auto& c) { c.eval_top_p = 1.5; })), ConfigError);
}

TEST(Config, FormatParseRoundTripIsExact)
{
    TrainConfig c;
    c.learning_rate = 0.1 + 0.2;  // not exactly representable as a short decimal
    c.lambda = 1.0 / 3.0;
    c.objective_mode = ObjectiveMode::IcrLpf;
    c.selection_variant = SelectionVariant::ShortestAny;
    c.alpha_scaling = AlphaScaling::BatchSum;
    c.seed = std::numeric_limits<std::uint64_t>::max() / 3;
    const auto parsed = parse_config_text(format_config(c));
    EXPECT_EQ(parsed.config, c);
    EXPECT_TRUE(parsed.extra.empty());
}

TEST(Config, CommentsBlankLinesAndSweepKeys)
{
    const auto parsed = parse_config_text(
        "# a comment\n"
        "\n"
        "objective_mode = grpo+lpg   # trailing comment\n"
        "lambda = 2\n"
        "sweep_lambdas = 0.5, 1, 2\n");
    EXPECT_EQ(parsed.config.objective_mode, ObjectiveMode::GrpoLpg);
    EXPECT_DOUBLE_EQ(parsed.config.lambda, 2.0);
    ASSERT_EQ(parsed.extra.count("sweep_lambdas"), 1u);
    EXPECT_EQ(parsed.extra.at("sweep_lambdas"), "0.5, 1, 2");
}

TEST(Config, UnknownKeyAndBadValuesAreErrors)
{
    EXPECT_THROW(parse_config_text("no_such_key = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("group_size = eight\n"), ConfigError);
    EXPECT_THROW(parse_config_text("group_size = 8.5\n"), ConfigError);
    EXPECT_THROW(parse_config_text("lambda = 1x\n"), ConfigError);
    EXPECT_THROW(parse_config_text("objective_mode = ppo\n"), ConfigError);
    EXPECT_THROW(parse_config_text("just text\n"), ConfigError);
}

TEST(Config, ErrorsNameTheLine)
{
    try {
        parse_config_text("lambda = 1\nbogus = 2\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(Config, ModeNamesRoundTrip)
{
    for (auto m : {ObjectiveMode::Grpo, ObjectiveMode::GrpoLpf, ObjectiveMode::GrpoLpg, ObjectiveMode::Icr,
                   ObjectiveMode::IcrLpf, ObjectiveMode::OnlyRegularizer}) {
        EXPECT_EQ(parse_objective_mode(to_string(m)), m);
    }
    for (auto v : {SelectionVariant::ShortestCorrect, SelectionVariant::AllSamples, SelectionVariant::ShortestAny}) {
        EXPECT_EQ(parse_selection_variant(to_string(v)), v);
    }
    EXPECT_EQ(to_string(ObjectiveMode::OnlyRegularizer), "only-regularizer");
    EXPECT_EQ(to_string(ObjectiveMode::GrpoLpf), "grpo+lpf");
}

TEST(Config, ModePredicates)
{
    EXPECT_TRUE(uses_grpo_term(ObjectiveMode::Icr));
    EXPECT_FALSE(uses_grpo_term(ObjectiveMode::OnlyRegularizer));
    EXPECT_TRUE(uses_regularizer(ObjectiveMode::IcrLpf));
    EXPECT_FALSE(uses_regularizer(ObjectiveMode::GrpoLpg));
    EXPECT_TRUE(uses_lpf(ObjectiveMode::IcrLpf));
    EXPECT_TRUE(uses_lpg(ObjectiveMode::GrpoLpg));
    EXPECT_FALSE(uses_lpf(ObjectiveMode::Grpo));
}

TEST(Config, FormatDoubleRoundTrips)
{
    for (double v : {0.0, 1.0, -2.5, 0.1, 1e-300, 1.0 / 7.0, 123456789.125}) {
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_THROW(parse_double("nan?"), ConfigError);
}
