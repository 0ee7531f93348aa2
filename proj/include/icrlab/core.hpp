#pragma once

// Shared domain types, configuration and deterministic random streams.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace icrlab {

// ---------------------------------------------------------------- errors

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- tokens

struct TokenId {
    std::uint16_t value{0};

    constexpr TokenId() = default;
    constexpr explicit TokenId(int v) : value{static_cast<std::uint16_t>(v)} {}

    constexpr auto operator<=>(const TokenId&) const = default;
};

using TokenSeq = std::vector<TokenId>;

struct Query {
    TokenSeq tokens;
    std::int64_t id{0};
};

struct Rollout {
    TokenSeq tokens;
    int length{0};
    std::vector<double> old_logprobs;
    bool correct{false};
    double shaped_reward{0.0};
    bool truncated{false};
};

struct RolloutGroup {
    Query query;
    std::vector<Rollout> rollouts;
    std::vector<double> advantages;
    std::vector<int> shortest_correct;
    std::optional<double> group_correlation;

    [[nodiscard]] int size() const { return static_cast<int>(rollouts.size()); }
};

// ---------------------------------------------------------------- config

enum class ObjectiveMode { Grpo, GrpoLpf, GrpoLpg, Icr, IcrLpf, OnlyRegularizer };

enum class SelectionVariant { ShortestCorrect, AllSamples, ShortestAny };

// How the ICR coefficient alpha_g = alpha0*|B|/|S(q)| is combined across the batch.
// BatchMean averages the per-group terms over the |B| groups (default); BatchSum adds them.
enum class AlphaScaling { BatchMean, BatchSum };

std::string_view to_string(ObjectiveMode mode);
std::string_view to_string(SelectionVariant variant);
std::string_view to_string(AlphaScaling scaling);
ObjectiveMode parse_objective_mode(std::string_view text);
SelectionVariant parse_selection_variant(std::string_view text);
AlphaScaling parse_alpha_scaling(std::string_view text);

bool uses_regularizer(ObjectiveMode mode);
bool uses_grpo_term(ObjectiveMode mode);
bool uses_lpf(ObjectiveMode mode);
bool uses_lpg(ObjectiveMode mode);

struct TrainConfig {
    // task
    int task_base{10};
    int task_query_len{2};

    // rollout / optimisation
    int group_size{8};
    int batch_queries{32};
    int minibatch_size{64};
    double clip_low{0.2};
    double clip_high{0.2};
    double learning_rate{0.05};
    double momentum{0.0};
    double sample_temperature{1.0};
    int length_budget{64};

    // objective
    ObjectiveMode objective_mode{ObjectiveMode::Grpo};
    SelectionVariant selection_variant{SelectionVariant::ShortestCorrect};
    AlphaScaling alpha_scaling{AlphaScaling::BatchMean};
    double lambda{0.0};
    double alpha0{0.5};
    int lpf_lmin{24};
    int lpf_lmax{48};

    // policy
    int position_buckets{8};
    double init_think_bias{4.0};
    double init_answer_skill{2.0};
    double init_format_skill{5.0};
    double init_scratch_penalty{3.0};
    double init_answer_noise{1.5};

    // evaluation
    int eval_every{10};
    int eval_queries{64};
    double eval_temperature{0.1};
    double eval_top_p{0.95};
    int eval_length_budget{128};

    // diagnostics / run
    double regime_deadband{0.02};
    std::uint64_t seed{1};
    int steps{300};
    int checkpoint_every{25};

    bool operator==(const TrainConfig&) const = default;
};

// Throws ConfigError naming the first violated constraint.
void validate(const TrainConfig& config);

// Apply one `key = value` assignment; unknown keys and malformed values throw ConfigError.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

// Resolved `key = value` text, one line per field, values round-trip exactly.
std::string format_config(const TrainConfig& config);

// Parses `key = value` lines. `#` starts a comment. Keys prefixed `sweep_` are returned
// in `extra` instead of being applied; every other key must be a TrainConfig field.
struct ParsedConfig {
    TrainConfig config;
    std::map<std::string, std::string> extra;
};
ParsedConfig parse_config_text(std::string_view text, TrainConfig base = {});
ParsedConfig load_config_file(const std::string& path, TrainConfig base = {});

// Round-trip decimal representation of a double.
std::string format_double(double value);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

// ---------------------------------------------------------------- random streams

// A deterministic, serializable random stream. Draws are defined only in terms of the
// raw 64-bit engine output so sequences are identical across standard libraries.
class RandomStream {
public:
    RandomStream() = default;
    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);

    // Fisher-Yates shuffle driven by below().
    template <typename T>
    void shuffle(std::vector<T>& items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    [[nodiscard]] std::string serialize() const;
    static RandomStream deserialize(std::string_view text);

    bool operator==(const RandomStream& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

RandomStream seeded_stream(std::uint64_t seed, std::uint64_t stream_id);

// Mixes a small tuple into a stream id (splitmix64 finaliser chain).
std::uint64_t derive_stream_id(std::uint64_t kind, std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace icrlab
