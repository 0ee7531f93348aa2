#pragma once

// On-policy training loop: snapshot, sample groups, shape rewards, compute advantages and
// S(q), take mini-batch gradient-ascent steps, log a StepRecord, checkpoint.

#include "icrlab/checkpoint.hpp"
#include "icrlab/core.hpp"
#include "icrlab/metrics.hpp"
#include "icrlab/objectives.hpp"
#include "icrlab/policy.hpp"
#include "icrlab/tasks.hpp"

#include <filesystem>
#include <functional>

namespace icrlab {

// Stream kinds passed to derive_stream_id.
enum class StreamKind : std::uint64_t {
    Trainer = 1,     // query sampling and mini-batch shuffles; persisted in checkpoints
    Rollouts = 2,    // per (step, query)
    EvalQueries = 3,
    EvalSampling = 4,
    Init = kInitStreamKind,
};

struct RunState {
    int step{0};
    PolicyParams params;
    std::vector<double> velocity;
    RandomStream trainer_stream;
};

RunState initial_state(const TrainConfig& config);
Checkpoint to_checkpoint(const RunState& state, const TrainConfig& config);
RunState from_checkpoint(const Checkpoint& checkpoint);

// Samples |B| queries with G rollouts each from the snapshot and fills rewards,
// advantages, S(q) and correlations.
std::vector<RolloutGroup> collect_groups(const PolicySnapshot& snapshot, const TrainConfig& config,
                                         const TaskSpec& task, RandomStream& trainer_stream,
                                         int step, int workers = 1);

// Fills shaped rewards, advantages, S(q) and correlation for sampled groups.
void annotate_group(RolloutGroup& group, const TrainConfig& config);

struct EvalResult {
    double accuracy{0.0};
    double mean_length{0.0};
};

// Held-out evaluation at the evaluation temperature / top-p and budget.
EvalResult evaluate(const PolicyParams& params, const TrainConfig& config, int step, int workers = 1);

// Optional hook to observe the sampled groups of each step (tests, diagnostics).
using GroupObserver = std::function<void(int step, std::span<const RolloutGroup>)>;

StepRecord train_step(RunState& state, const TrainConfig& config, const TaskSpec& task,
                      int workers = 1, const GroupObserver& observer = {});

struct RunOptions {
    std::filesystem::path out_dir;  // empty: nothing is written
    int workers{1};
    bool resume{false};
    int stop_after{-1};  // stop after this step without a final checkpoint (interruption)
    GroupObserver observer;
};

struct RunResult {
    RunState state;
    std::vector<StepRecord> records;
};

// Layout under out_dir: config.cfg, metrics.jsonl, checkpoints/step_NNNNNN.ckpt.
RunResult run(const TrainConfig& config, const RunOptions& options = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, int step);
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& out_dir);

// ---------------------------------------------------------------- sweep

struct Variation {
    ObjectiveMode mode{ObjectiveMode::Grpo};
    double lambda{0.0};
    SelectionVariant variant{SelectionVariant::ShortestCorrect};
    std::uint64_t seed{1};
};

// Cartesian product of the sweep_* keys (sweep_modes, sweep_lambdas,
// sweep_selection_variants, sweep_seeds); missing keys default to the base config value.
std::vector<Variation> parse_sweep_grid(const std::map<std::string, std::string>& extra,
                                        const TrainConfig& base);

std::string run_id(int index, const Variation& v);

struct SweepOptions {
    std::filesystem::path out_dir;  // empty: nothing is written
    int workers{1};
};

struct SweepResult {
    std::vector<ParetoRow> rows;
    std::vector<std::string> failures;
};

SweepResult sweep(const TrainConfig& base, std::span<const Variation> variations,
                  const SweepOptions& options = {});

}  // namespace icrlab
