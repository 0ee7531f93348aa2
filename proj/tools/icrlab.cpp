// icrlab command-line entry point: train, eval, sweep, check, simulate-groups.

#include "icrlab/checkpoint.hpp"
#include "icrlab/trainer.hpp"
#include "icrlab/verification.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace icrlab;

namespace {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2, kOracle = 3 };

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    int workers{1};
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, CommonOptions& o, bool with_out)
{
    app->add_option("--config", o.config_path, "config file (key = value lines)");
    app->add_option("--set", o.overrides, "override KEY=VALUE (repeatable)");
    if (with_out) {
        app->add_option("--out", o.out_dir, "output directory");
    }
    app->add_option("--workers", o.workers, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    app->add_option("--seed", o.seed, "seed override");
}

// File first, then --set, then --seed; validated.
ParsedConfig resolve(const CommonOptions& o)
{
    ParsedConfig parsed;
    if (!o.config_path.empty()) {
        parsed = load_config_file(o.config_path);
    }
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        }
        const auto key = kv.substr(0, eq);
        if (key.starts_with("sweep_")) {
            parsed.extra[key] = kv.substr(eq + 1);
        } else {
            apply_setting(parsed.config, key, kv.substr(eq + 1));
        }
    }
    if (o.seed) {
        parsed.config.seed = *o.seed;
    }
    validate(parsed.config);
    return parsed;
}

int cmd_train(const CommonOptions& o, bool resume)
{
    const auto parsed = resolve(o);
    if (!parsed.extra.empty()) {
        throw ConfigError("sweep_* keys are only valid for the sweep subcommand");
    }
    RunOptions options;
    options.out_dir = o.out_dir.empty() ? "run" : o.out_dir;
    options.workers = o.workers;
    options.resume = resume;
    const auto result = run(parsed.config, options);
    std::cout << "steps " << result.state.step << " -> " << options.out_dir.string() << '\n';
    if (!result.records.empty()) {
        std::cout << to_json_line(result.records.back()) << '\n';
    }
    return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& run_dir, const CommonOptions& o)
{
    std::filesystem::path path = checkpoint;
    if (path.empty()) {
        const auto latest = latest_checkpoint(run_dir.empty() ? "run" : run_dir);
        if (!latest) {
            throw CheckpointError("no checkpoint found under " + run_dir);
        }
        path = *latest;
    }
    const auto ckpt = load_checkpoint(path);
    auto config = ckpt.config;
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        }
        const auto key = kv.substr(0, eq);
        if (!key.starts_with("eval_")) {
            throw ConfigError("eval only accepts eval_* overrides, got '" + key + "'");
        }
        apply_setting(config, key, kv.substr(eq + 1));
    }
    validate(config);
    const auto result = evaluate(ckpt.params, config, ckpt.step, o.workers);
    std::cout << "checkpoint " << path.string() << " step " << ckpt.step << '\n'
              << "eval_accuracy " << format_double(result.accuracy) << '\n'
              << "eval_mean_length " << format_double(result.mean_length) << '\n';
    return kOk;
}

int cmd_sweep(const CommonOptions& o)
{
    const auto parsed = resolve(o);
    const auto grid = parse_sweep_grid(parsed.extra, parsed.config);
    SweepOptions options;
    options.out_dir = o.out_dir.empty() ? "sweep" : o.out_dir;
    options.workers = o.workers;

    std::filesystem::create_directories(options.out_dir);
    {
        std::ofstream snapshot(options.out_dir / "config.cfg", std::ios::binary | std::ios::trunc);
        snapshot << format_config(parsed.config);
        for (const auto& [key, value] : parsed.extra) {
            snapshot << key << " = " << value << '\n';
        }
    }
    const auto result = sweep(parsed.config, grid, options);
    std::cout << result.rows.size() << " of " << grid.size() << " runs -> "
              << (options.out_dir / "pareto.csv").string() << '\n';
    for (const auto& f : result.failures) {
        std::cerr << "failed: " << f << '\n';
    }
    return result.failures.empty() ? kOk : kNumerical;
}

int cmd_check(std::uint64_t seed, int workers)
{
    bool ok = true;
    for (const auto& report : run_oracle_suite(seed, workers)) {
        std::cout << format_report(report) << '\n';
        ok = ok && report.pass && !report.inconclusive;
    }
    return ok ? kOk : kOracle;
}

struct SimulateOptions {
    long groups{1000};
    int group_size{8};
    std::string law{"decreasing"};
    double p{0.5};
    int min_length{1};
    int max_length{64};
    std::uint64_t seed{1};
    std::string out;
};

int cmd_simulate(const SimulateOptions& s)
{
    if (s.min_length < 1 || s.max_length < s.min_length || s.group_size < 1 || s.groups < 0) {
        throw ConfigError("simulate-groups: need 1 <= min-length <= max-length, group-size >= 1");
    }
    GroupDistribution dist;
    dist.length_law = LengthLaw{s.min_length, s.max_length};
    dist.group_size = s.group_size;
    if (s.law == "decreasing") {
        dist.correctness_law = CorrectnessLaw::decreasing(s.max_length);
    } else if (s.law == "increasing") {
        dist.correctness_law = CorrectnessLaw::increasing(s.max_length);
    } else if (s.law == "constant") {
        dist.correctness_law = CorrectnessLaw::constant(s.p, s.max_length);
    } else {
        throw ConfigError("unknown law '" + s.law + "'");
    }

    std::ofstream file;
    if (!s.out.empty()) {
        file.open(s.out, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw std::runtime_error("cannot write " + s.out);
        }
    }
    std::ostream& out = s.out.empty() ? std::cout : file;
    out << "group_id,member_id,length,correct\n";
    auto stream = seeded_stream(s.seed, derive_stream_id(6));
    for (long g = 0; g < s.groups; ++g) {
        const auto group = sample_synthetic_group(dist, stream);
        for (std::size_t i = 0; i < group.size(); ++i) {
            out << g << ',' << i << ',' << group[i].length << ',' << (group[i].correct ? 1 : 0) << '\n';
        }
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"icrlab: GRPO, length penalties and implicit compression regularization at desk scale"};
    app.require_subcommand(1);

    CommonOptions train_opts;
    bool resume = false;
    auto* train = app.add_subcommand("train", "run the trainer");
    add_common(train, train_opts, true);
    train->add_flag("--resume", resume, "continue from the latest checkpoint in --out");

    CommonOptions eval_opts;
    std::string checkpoint;
    std::string run_dir;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint at the evaluation settings");
    eval->add_option("--checkpoint", checkpoint, "checkpoint file");
    eval->add_option("--run", run_dir, "run directory (uses its latest checkpoint)");
    eval->add_option("--set", eval_opts.overrides, "override an eval_* key (repeatable)");
    eval->add_option("--workers", eval_opts.workers)->check(CLI::PositiveNumber);

    CommonOptions sweep_opts;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a variation grid and write pareto.csv");
    add_common(sweep_cmd, sweep_opts, true);

    std::uint64_t check_seed = 1;
    int check_workers = 1;
    auto* check = app.add_subcommand("check", "run the oracle suite");
    check->add_option("--seed", check_seed);
    check->add_option("--workers", check_workers)->check(CLI::PositiveNumber);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate-groups", "emit synthetic (length, correct) groups as CSV");
    simulate->add_option("--groups", sim.groups);
    simulate->add_option("--group-size", sim.group_size);
    simulate->add_option("--law", sim.law, "decreasing | constant | increasing");
    simulate->add_option("--p", sim.p, "success probability for the constant law");
    simulate->add_option("--min-length", sim.min_length);
    simulate->add_option("--max-length", sim.max_length);
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--out", sim.out, "CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    try {
        if (*train) {
            return cmd_train(train_opts, resume);
        }
        if (*eval) {
            return cmd_eval(checkpoint, run_dir, eval_opts);
        }
        if (*sweep_cmd) {
            return cmd_sweep(sweep_opts);
        }
        if (*check) {
            return cmd_check(check_seed, check_workers);
        }
        if (*simulate) {
            return cmd_simulate(sim);
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return kNumerical;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kValidation;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kValidation;
}
