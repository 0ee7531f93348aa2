#include "icrlab/core.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace icrlab {

namespace {

struct ModeName {
    ObjectiveMode mode;
    std::string_view name;
};

constexpr std::array kModeNames{
    ModeName{ObjectiveMode::Grpo, "grpo"},
    ModeName{ObjectiveMode::GrpoLpf, "grpo+lpf"},
    ModeName{ObjectiveMode::GrpoLpg, "grpo+lpg"},
    ModeName{ObjectiveMode::Icr, "icr"},
    ModeName{ObjectiveMode::IcrLpf, "icr+lpf"},
    ModeName{ObjectiveMode::OnlyRegularizer, "only-regularizer"},
};

struct VariantName {
    SelectionVariant variant;
    std::string_view name;
};

constexpr std::array kVariantNames{
    VariantName{SelectionVariant::ShortestCorrect, "shortest-correct"},
    VariantName{SelectionVariant::AllSamples, "all-samples"},
    VariantName{SelectionVariant::ShortestAny, "shortest-any"},
};

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One entry per TrainConfig field. Order defines the resolved-config layout.
struct Field {
    std::string_view key;
    std::function<void(TrainConfig&, std::string_view)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field int_field(std::string_view key, T TrainConfig::*member)
{
    return Field{
        key,
        [member, key](TrainConfig& c, std::string_view v) {
            const auto parsed = parse_int(v);
            if (parsed < 0 && std::is_unsigned_v<T>) {
                throw ConfigError("negative value for " + std::string(key));
            }
            c.*member = static_cast<T>(parsed);
        },
        [member](const TrainConfig& c) { return std::to_string(c.*member); },
    };
}

Field real_field(std::string_view key, double TrainConfig::*member)
{
    return Field{
        key,
        [member](TrainConfig& c, std::string_view v) { c.*member = parse_double(v); },
        [member](const TrainConfig& c) { return format_double(c.*member); },
    };
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table{
        int_field("task_base", &TrainConfig::task_base),
        int_field("task_query_len", &TrainConfig::task_query_len),
        int_field("group_size", &TrainConfig::group_size),
        int_field("batch_queries", &TrainConfig::batch_queries),
        int_field("minibatch_size", &TrainConfig::minibatch_size),
        real_field("clip_low", &TrainConfig::clip_low),
        real_field("clip_high", &TrainConfig::clip_high),
        real_field("learning_rate", &TrainConfig::learning_rate),
        real_field("momentum", &TrainConfig::momentum),
        real_field("sample_temperature", &TrainConfig::sample_temperature),
        int_field("length_budget", &TrainConfig::length_budget),
        Field{
            "objective_mode",
            [](TrainConfig& c, std::string_view v) { c.objective_mode = parse_objective_mode(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.objective_mode)); },
        },
        Field{
            "selection_variant",
            [](TrainConfig& c, std::string_view v) { c.selection_variant = parse_selection_variant(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.selection_variant)); },
        },
        Field{
            "alpha_scaling",
            [](TrainConfig& c, std::string_view v) { c.alpha_scaling = parse_alpha_scaling(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.alpha_scaling)); },
        },
        real_field("lambda", &TrainConfig::lambda),
        real_field("alpha0", &TrainConfig::alpha0),
        int_field("lpf_lmin", &TrainConfig::lpf_lmin),
        int_field("lpf_lmax", &TrainConfig::lpf_lmax),
        int_field("position_buckets", &TrainConfig::position_buckets),
        real_field("init_think_bias", &TrainConfig::init_think_bias),
        real_field("init_answer_skill", &TrainConfig::init_answer_skill),
        real_field("init_format_skill", &TrainConfig::init_format_skill),
        real_field("init_scratch_penalty", &TrainConfig::init_scratch_penalty),
        real_field("init_answer_noise", &TrainConfig::init_answer_noise),
        int_field("eval_every", &TrainConfig::eval_every),
        int_field("eval_queries", &TrainConfig::eval_queries),
        real_field("eval_temperature", &TrainConfig::eval_temperature),
        real_field("eval_top_p", &TrainConfig::eval_top_p),
        int_field("eval_length_budget", &TrainConfig::eval_length_budget),
        real_field("regime_deadband", &TrainConfig::regime_deadband),
        int_field("seed", &TrainConfig::seed),
        int_field("steps", &TrainConfig::steps),
        int_field("checkpoint_every", &TrainConfig::checkpoint_every),
    };
    return table;
}

void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw ConfigError(message);
    }
}

}  // namespace

std::string_view to_string(ObjectiveMode mode)
{
    for (const auto& entry : kModeNames) {
        if (entry.mode == mode) {
            return entry.name;
        }
    }
    return "?";
}

std::string_view to_string(SelectionVariant variant)
{
    for (const auto& entry : kVariantNames) {
        if (entry.variant == variant) {
            return entry.name;
        }
    }
    return "?";
}

std::string_view to_string(AlphaScaling scaling)
{
    return scaling == AlphaScaling::BatchMean ? "batch-mean" : "batch-sum";
}

ObjectiveMode parse_objective_mode(std::string_view text)
{
    for (const auto& entry : kModeNames) {
        if (entry.name == text) {
            return entry.mode;
        }
    }
    throw ConfigError("unknown objective_mode '" + std::string(text) + "'");
}

SelectionVariant parse_selection_variant(std::string_view text)
{
    for (const auto& entry : kVariantNames) {
        if (entry.name == text) {
            return entry.variant;
        }
    }
    throw ConfigError("unknown selection_variant '" + std::string(text) + "'");
}

AlphaScaling parse_alpha_scaling(std::string_view text)
{
    if (text == "batch-mean") {
        return AlphaScaling::BatchMean;
    }
    if (text == "batch-sum") {
        return AlphaScaling::BatchSum;
    }
    throw ConfigError("unknown alpha_scaling '" + std::string(text) + "'");
}

bool uses_regularizer(ObjectiveMode mode)
{
    return mode == ObjectiveMode::Icr || mode == ObjectiveMode::IcrLpf ||
           mode == ObjectiveMode::OnlyRegularizer;
}

bool uses_grpo_term(ObjectiveMode mode) { return mode != ObjectiveMode::OnlyRegularizer; }

bool uses_lpf(ObjectiveMode mode)
{
    return mode == ObjectiveMode::GrpoLpf || mode == ObjectiveMode::IcrLpf;
}

bool uses_lpg(ObjectiveMode mode) { return mode == ObjectiveMode::GrpoLpg; }

void validate(const TrainConfig& c)
{
    require(c.task_base >= 2, "task_base must be >= 2");
    require(c.task_query_len >= 1, "task_query_len must be >= 1");
    require(c.group_size >= 2, "group_size must be >= 2");
    require(c.batch_queries >= 1, "batch_queries must be >= 1");
    require(c.minibatch_size >= c.group_size && c.minibatch_size % c.group_size == 0,
            "minibatch_size must be a positive multiple of group_size");
    require((c.batch_queries * c.group_size) % c.minibatch_size == 0,
            "batch_queries * group_size must be a multiple of minibatch_size");
    require(c.clip_low > 0.0 && c.clip_low < 1.0, "clip_low must be in (0, 1)");
    require(c.clip_high > 0.0 && c.clip_high < 1.0, "clip_high must be in (0, 1)");
    require(c.learning_rate >= 0.0, "learning_rate must be >= 0");
    require(c.momentum >= 0.0 && c.momentum < 1.0, "momentum must be in [0, 1)");
    require(c.sample_temperature > 0.0, "sample_temperature must be > 0");
    require(c.length_budget >= 1, "length_budget must be >= 1");
    require(c.lambda >= 0.0, "lambda must be >= 0");
    require(c.alpha0 >= 0.0, "alpha0 must be >= 0");
    require(c.lpf_lmin < c.lpf_lmax, "lpf_lmin must be < lpf_lmax");
    require(c.lpf_lmax <= c.length_budget, "lpf_lmax must be <= length_budget");
    require(c.lpf_lmin >= 0, "lpf_lmin must be >= 0");
    require(c.position_buckets >= 1, "position_buckets must be >= 1");
    require(c.init_answer_noise >= 0.0, "init_answer_noise must be >= 0");
    require(c.eval_every >= 1, "eval_every must be >= 1");
    require(c.eval_queries >= 1, "eval_queries must be >= 1");
    require(c.eval_temperature > 0.0, "eval_temperature must be > 0");
    require(c.eval_top_p > 0.0 && c.eval_top_p <= 1.0, "eval_top_p must be in (0, 1]");
    require(c.eval_length_budget >= 1, "eval_length_budget must be >= 1");
    require(c.regime_deadband >= 0.0, "regime_deadband must be >= 0");
    require(c.steps >= 0, "steps must be >= 0");
    require(c.checkpoint_every >= 1, "checkpoint_every must be >= 1");
}

void apply_setting(TrainConfig& config, std::string_view key, std::string_view value)
{
    key = trim(key);
    value = trim(value);
    for (const auto& field : fields()) {
        if (field.key == key) {
            field.set(config, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string format_config(const TrainConfig& config)
{
    std::string out;
    for (const auto& field : fields()) {
        out += field.key;
        out += " = ";
        out += field.get(config);
        out += '\n';
    }
    return out;
}

ParsedConfig parse_config_text(std::string_view text, TrainConfig base)
{
    ParsedConfig parsed{std::move(base), {}};
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto eol = text.find('\n');
        auto line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.starts_with("sweep_")) {
            parsed.extra[std::string(key)] = std::string(value);
            continue;
        }
        try {
            apply_setting(parsed.config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return parsed;
}

ParsedConfig load_config_file(const std::string& path, TrainConfig base)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), std::move(base));
}

std::string format_double(double value)
{
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

double parse_double(std::string_view text)
{
    text = trim(text);
    double value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw ConfigError("malformed number '" + std::string(text) + "'");
    }
    return value;
}

std::int64_t parse_int(std::string_view text)
{
    text = trim(text);
    std::int64_t value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw ConfigError("malformed integer '" + std::string(text) + "'");
    }
    return value;
}

// ---------------------------------------------------------------- RandomStream

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
{
    // std::seed_seq::generate is fully specified by the standard, so the engine state
    // is identical on every conforming implementation.
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream_id),
        static_cast<std::uint32_t>(stream_id >> 32),
    };
    engine_.seed(seq);
}

double RandomStream::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

std::string RandomStream::serialize() const
{
    std::ostringstream out;
    out << engine_;
    return out.str();
}

RandomStream RandomStream::deserialize(std::string_view text)
{
    RandomStream stream;
    std::istringstream in{std::string(text)};
    in >> stream.engine_;
    if (in.fail()) {
        throw CheckpointError("malformed random-stream state");
    }
    return stream;
}

RandomStream seeded_stream(std::uint64_t seed, std::uint64_t stream_id)
{
    return RandomStream(seed, stream_id);
}

std::uint64_t derive_stream_id(std::uint64_t kind, std::uint64_t a, std::uint64_t b)
{
    return splitmix64(splitmix64(splitmix64(kind) ^ a) ^ b);
}

}  // namespace icrlab
