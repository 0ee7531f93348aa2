#include "icrlab/trainer.hpp"

#include "icrlab/parallel.hpp"
#include "icrlab/rewards.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace icrlab {

namespace {

std::uint64_t stream_id(StreamKind kind, std::uint64_t a = 0, std::uint64_t b = 0)
{
    return derive_stream_id(static_cast<std::uint64_t>(kind), a, b);
}

double l2_norm(std::span<const double> v)
{
    double s = 0.0;
    for (const double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

std::vector<std::string> split_list(std::string_view text)
{
    std::vector<std::string> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        auto item = text.substr(0, comma);
        while (!item.empty() && item.front() == ' ') {
            item.remove_prefix(1);
        }
        while (!item.empty() && item.back() == ' ') {
            item.remove_suffix(1);
        }
        if (!item.empty()) {
            out.emplace_back(item);
        }
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

}  // namespace

// ---------------------------------------------------------------- state

RunState initial_state(const TrainConfig& config)
{
    const auto task = TaskSpec::from_config(config);
    const auto layout = FeatureLayout::for_task(task, config.position_buckets);
    RunState state;
    state.params = PolicyParams::initial(layout, config);
    if (config.momentum > 0.0) {
        state.velocity.assign(state.params.size(), 0.0);
    }
    state.trainer_stream = seeded_stream(config.seed, stream_id(StreamKind::Trainer));
    return state;
}

Checkpoint to_checkpoint(const RunState& state, const TrainConfig& config)
{
    return Checkpoint{config, state.step, state.params, state.velocity, state.trainer_stream};
}

RunState from_checkpoint(const Checkpoint& checkpoint)
{
    return RunState{checkpoint.step, checkpoint.params, checkpoint.velocity, checkpoint.trainer_stream};
}

// ---------------------------------------------------------------- sampling

void annotate_group(RolloutGroup& group, const TrainConfig& config)
{
    const auto rewards = shape_group_rewards(group.rollouts, config);
    std::vector<double> totals;
    totals.reserve(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        group.rollouts[i].shaped_reward = rewards[i].total;
        totals.push_back(rewards[i].total);
    }
    group.advantages = group_advantages(totals);
    group.shortest_correct = shortest_correct_set(group.rollouts, config.selection_variant);
    group.group_correlation = group_correlation(std::span<const Rollout>(group.rollouts));
}

std::vector<RolloutGroup> collect_groups(const PolicySnapshot& snapshot, const TrainConfig& config,
                                         const TaskSpec& task, RandomStream& trainer_stream,
                                         int step, int workers)
{
    const auto n = static_cast<std::size_t>(config.batch_queries);
    std::vector<RolloutGroup> groups(n);
    for (std::size_t q = 0; q < n; ++q) {
        groups[q].query = sample_query(task, trainer_stream,
                                       static_cast<std::int64_t>(step) * config.batch_queries +
                                           static_cast<std::int64_t>(q));
    }
    const SamplingOptions options{config.sample_temperature, 1.0};
    parallel_for(static_cast<int>(n), workers, [&](int q) {
        auto& group = groups[static_cast<std::size_t>(q)];
        auto stream = seeded_stream(config.seed, stream_id(StreamKind::Rollouts,
                                                           static_cast<std::uint64_t>(step),
                                                           static_cast<std::uint64_t>(q)));
        group.rollouts.reserve(static_cast<std::size_t>(config.group_size));
        for (int i = 0; i < config.group_size; ++i) {
            group.rollouts.push_back(sample_rollout(snapshot, task, group.query, options, stream));
        }
        annotate_group(group, config);
    });
    return groups;
}

EvalResult evaluate(const PolicyParams& params, const TrainConfig& config, int step, int workers)
{
    auto task = TaskSpec::from_config(config);
    task.length_budget = config.eval_length_budget;
    auto query_stream = seeded_stream(config.seed, stream_id(StreamKind::EvalQueries));
    std::vector<Query> queries;
    for (int i = 0; i < config.eval_queries; ++i) {
        queries.push_back(sample_query(task, query_stream, i));
    }

    const PolicySnapshot snapshot{params};
    const SamplingOptions options{config.eval_temperature, config.eval_top_p};
    std::vector<Rollout> results(queries.size());
    parallel_for(static_cast<int>(queries.size()), workers, [&](int i) {
        auto stream = seeded_stream(config.seed, stream_id(StreamKind::EvalSampling,
                                                           static_cast<std::uint64_t>(step),
                                                           static_cast<std::uint64_t>(i)));
        results[static_cast<std::size_t>(i)] =
            sample_rollout(snapshot, task, queries[static_cast<std::size_t>(i)], options, stream);
    });

    EvalResult out;
    for (const auto& r : results) {
        out.accuracy += r.correct ? 1.0 : 0.0;
        out.mean_length += r.length;
    }
    out.accuracy /= static_cast<double>(results.size());
    out.mean_length /= static_cast<double>(results.size());
    return out;
}

// ---------------------------------------------------------------- train_step

StepRecord train_step(RunState& state, const TrainConfig& config, const TaskSpec& task, int workers,
                      const GroupObserver& observer)
{
    const int step = state.step + 1;
    const PolicySnapshot snapshot{state.params};
    auto groups = collect_groups(snapshot, config, task, state.trainer_stream, step, workers);
    if (observer) {
        observer(step, groups);
    }

    StepRecord record;
    record.step = step;
    const auto summary = summarize(groups);
    record.train_accuracy = summary.accuracy;
    record.mean_length = summary.mean_length;
    record.truncation_rate = summary.truncation_rate;
    const auto corr = batch_correlation(std::span<const RolloutGroup>(groups));
    record.batch_correlation = corr.mean;
    record.valid_group_fraction = corr.valid_fraction;
    record.pi_s_mean_length = pi_s_mean_length(groups);
    record.regime = classify_regime(corr.mean, config.regime_deadband);

    // One epoch over group-aligned mini-batches in a shuffled order.
    std::vector<int> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    state.trainer_stream.shuffle(order);
    std::vector<RolloutGroup> shuffled;
    shuffled.reserve(groups.size());
    for (const int g : order) {
        shuffled.push_back(std::move(groups[static_cast<std::size_t>(g)]));
    }

    const auto per_minibatch = static_cast<std::size_t>(config.minibatch_size / config.group_size);
    const std::size_t n_minibatches = shuffled.size() / per_minibatch;
    double objective = 0.0;
    double regularizer = 0.0;
    double grad_norm = 0.0;
    for (std::size_t mb = 0; mb < n_minibatches; ++mb) {
        const std::span<const RolloutGroup> batch(shuffled.data() + mb * per_minibatch, per_minibatch);
        const auto ctx = LossContext::from_config(task, state.params, config, workers);
        LossResult loss;
        try {
            loss = objective_and_grad(batch, ctx);
        } catch (const NumericalError& e) {
            throw NumericalError("step " + std::to_string(step) + ": " + e.what());
        }
        objective += loss.objective;
        regularizer += loss.regularizer_term;
        grad_norm += l2_norm(loss.gradient);

        auto weights = state.params.weights();
        if (config.momentum > 0.0) {
            for (std::size_t k = 0; k < weights.size(); ++k) {
                state.velocity[k] = config.momentum * state.velocity[k] + loss.gradient[k];
                weights[k] += config.learning_rate * state.velocity[k];
            }
        } else {
            for (std::size_t k = 0; k < weights.size(); ++k) {
                weights[k] += config.learning_rate * loss.gradient[k];
            }
        }
        if (!state.params.all_finite()) {
            throw NumericalError("step " + std::to_string(step) + ": non-finite parameters after update");
        }
    }
    if (n_minibatches > 0) {
        const auto m = static_cast<double>(n_minibatches);
        record.objective_value = objective / m;
        record.regularizer_value = regularizer / m;
        record.grad_norm = grad_norm / m;
    }

    if (step % config.eval_every == 0 || step == config.steps) {
        const auto eval = evaluate(state.params, config, step, workers);
        record.eval_accuracy = eval.accuracy;
        record.eval_mean_length = eval.mean_length;
    }

    state.step = step;
    return record;
}

// ---------------------------------------------------------------- run

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, int step)
{
    char name[32];
    std::snprintf(name, sizeof name, "step_%06d.ckpt", step);
    return out_dir / "checkpoints" / name;
}

std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& out_dir)
{
    const auto dir = out_dir / "checkpoints";
    if (!std::filesystem::is_directory(dir)) {
        return std::nullopt;
    }
    std::optional<std::filesystem::path> best;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (!name.starts_with("step_") || entry.path().extension() != ".ckpt") {
            continue;
        }
        if (!best || entry.path().filename() > best->filename()) {
            best = entry.path();
        }
    }
    return best;
}

RunResult run(const TrainConfig& config, const RunOptions& options)
{
    validate(config);
    const auto task = TaskSpec::from_config(config);
    const bool write = !options.out_dir.empty();

    RunResult result;
    result.state = initial_state(config);

    const auto metrics_path = options.out_dir / "metrics.jsonl";
    if (write) {
        std::filesystem::create_directories(options.out_dir / "checkpoints");
    }

    bool resumed = false;
    if (write && options.resume) {
        if (const auto latest = latest_checkpoint(options.out_dir)) {
            auto ckpt = load_checkpoint(*latest);
            auto comparable = ckpt.config;
            comparable.steps = config.steps;
            if (!(comparable == config)) {
                throw ConfigError("checkpoint " + latest->string() + " was written with a different config");
            }
            result.state = from_checkpoint(ckpt);
            resumed = true;

            // Keep the metrics rows the checkpoint already covers.
            std::ifstream in(metrics_path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) {
                    continue;
                }
                auto record = from_json_line(line);
                if (record.step <= result.state.step) {
                    result.records.push_back(std::move(record));
                }
            }
        }
    }

    std::ofstream metrics;
    if (write) {
        write_text(options.out_dir / "config.cfg", format_config(config));
        metrics.open(metrics_path, std::ios::binary | std::ios::trunc);
        if (!metrics) {
            throw std::runtime_error("cannot write " + metrics_path.string());
        }
        for (const auto& r : result.records) {
            metrics << to_json_line(r) << '\n';
        }
        metrics.flush();
        if (!resumed) {
            save_checkpoint(to_checkpoint(result.state, config), checkpoint_path(options.out_dir, 0));
        }
    }

    while (result.state.step < config.steps) {
        auto record = train_step(result.state, config, task, options.workers, options.observer);
        if (write) {
            metrics << to_json_line(record) << '\n';
            metrics.flush();
        }
        result.records.push_back(std::move(record));
        const int step = result.state.step;
        if (options.stop_after >= 0 && step >= options.stop_after) {
            return result;
        }
        if (write && (step % config.checkpoint_every == 0 || step == config.steps)) {
            save_checkpoint(to_checkpoint(result.state, config), checkpoint_path(options.out_dir, step));
        }
    }
    return result;
}

// ---------------------------------------------------------------- sweep

std::vector<Variation> parse_sweep_grid(const std::map<std::string, std::string>& extra,
                                        const TrainConfig& base)
{
    for (const auto& [key, value] : extra) {
        if (key != "sweep_modes" && key != "sweep_lambdas" && key != "sweep_selection_variants" &&
            key != "sweep_seeds") {
            throw ConfigError("unknown sweep key '" + key + "'");
        }
    }
    auto list = [&](const std::string& key, std::string fallback) {
        const auto it = extra.find(key);
        return split_list(it == extra.end() ? fallback : it->second);
    };

    std::vector<ObjectiveMode> modes;
    for (const auto& m : list("sweep_modes", std::string(to_string(base.objective_mode)))) {
        modes.push_back(parse_objective_mode(m));
    }
    std::vector<double> lambdas;
    for (const auto& l : list("sweep_lambdas", format_double(base.lambda))) {
        lambdas.push_back(parse_double(l));
    }
    std::vector<SelectionVariant> variants;
    for (const auto& v : list("sweep_selection_variants", std::string(to_string(base.selection_variant)))) {
        variants.push_back(parse_selection_variant(v));
    }
    std::vector<std::uint64_t> seeds;
    for (const auto& s : list("sweep_seeds", std::to_string(base.seed))) {
        const auto parsed = parse_int(s);
        if (parsed < 0) {
            throw ConfigError("sweep seeds must be non-negative");
        }
        seeds.push_back(static_cast<std::uint64_t>(parsed));
    }

    std::vector<Variation> grid;
    for (const auto mode : modes) {
        for (const double lambda : lambdas) {
            for (const auto variant : variants) {
                for (const auto seed : seeds) {
                    grid.push_back({mode, lambda, variant, seed});
                }
            }
        }
    }
    return grid;
}

std::string run_id(int index, const Variation& v)
{
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "r%03d", index);
    std::ostringstream id;
    id << prefix << '_' << to_string(v.mode) << "_lambda" << format_double(v.lambda) << '_'
       << to_string(v.variant) << "_seed" << v.seed;
    return id.str();
}

SweepResult sweep(const TrainConfig& base, std::span<const Variation> variations,
                  const SweepOptions& options)
{
    SweepResult result;
    std::vector<ParetoPoint> points;
    for (std::size_t i = 0; i < variations.size(); ++i) {
        const auto& v = variations[i];
        const auto id = run_id(static_cast<int>(i), v);
        auto config = base;
        config.objective_mode = v.mode;
        config.lambda = v.lambda;
        config.selection_variant = v.variant;
        config.seed = v.seed;
        try {
            RunOptions run_options;
            run_options.workers = options.workers;
            if (!options.out_dir.empty()) {
                run_options.out_dir = options.out_dir / "runs" / id;
            }
            const auto finished = run(config, run_options);
            const auto eval = evaluate(finished.state.params, config, finished.state.step, options.workers);
            points.push_back({id, std::string(to_string(v.mode)), v.lambda, eval.mean_length, eval.accuracy});
        } catch (const std::exception& e) {
            result.failures.push_back(id + ": " + e.what());
        }
    }
    result.rows = pareto_table(std::move(points));

    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        std::ofstream csv(options.out_dir / "pareto.csv", std::ios::binary | std::ios::trunc);
        write_pareto_csv(csv, result.rows);
        if (!result.failures.empty()) {
            std::ofstream failures(options.out_dir / "failures.txt", std::ios::binary | std::ios::trunc);
            for (const auto& f : result.failures) {
                failures << f << '\n';
            }
        }
    }
    return result;
}

}  // namespace icrlab
