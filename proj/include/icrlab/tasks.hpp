#pragma once

// Synthetic verifiable environments.
//
// ModSum: a query is `query_len` digits in base `base`. A response is
//   (THINK | digit)* ANSWER d EOS
// and is correct iff d == (sum of query digits) mod base and the whole response fits in
// the length budget. Truncated responses are never correct.

#include "icrlab/core.hpp"

#include <span>
#include <utility>

namespace icrlab {

struct TaskSpec {
    int base{10};
    int query_len{2};
    int length_budget{64};

    [[nodiscard]] int vocab_size() const { return base + 3; }
    [[nodiscard]] TokenId think() const { return TokenId{base}; }
    [[nodiscard]] TokenId answer() const { return TokenId{base + 1}; }
    [[nodiscard]] TokenId eos() const { return TokenId{base + 2}; }
    [[nodiscard]] bool is_digit(TokenId t) const { return t.value < base; }
    [[nodiscard]] bool in_vocab(TokenId t) const { return t.value < vocab_size(); }

    static TaskSpec from_config(const TrainConfig& config);
};

Query sample_query(const TaskSpec& task, RandomStream& stream, std::int64_t id = 0);

// (sum of query digits) mod base.
int target_digit(const TaskSpec& task, const Query& query);

// Pure; malformed responses return false.
bool verify(const TaskSpec& task, const Query& query, std::span<const TokenId> response);

// ---------------------------------------------------------------- synthetic groups

// Uniform integer lengths in [min_length, max_length].
struct LengthLaw {
    int min_length{1};
    int max_length{64};
};

// p(len) = clamp(intercept + slope * len / reference_length, 0, 1).
struct CorrectnessLaw {
    double intercept{1.0};
    double slope{-1.0};
    int reference_length{64};

    [[nodiscard]] double probability(int length) const;

    static CorrectnessLaw constant(double p, int reference_length);
    static CorrectnessLaw decreasing(int reference_length);  // 1 - len/L
    static CorrectnessLaw increasing(int reference_length);  // len/L
};

struct GroupDistribution {
    LengthLaw length_law;
    CorrectnessLaw correctness_law;
    int group_size{8};
};

struct SyntheticSample {
    int length{0};
    bool correct{false};
};

std::vector<SyntheticSample> sample_synthetic_group(const GroupDistribution& dist,
                                                    RandomStream& stream);

}  // namespace icrlab
