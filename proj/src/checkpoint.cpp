#include "icrlab/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace icrlab {

namespace {

constexpr std::string_view kMagic = "icrlab-checkpoint";

std::uint64_t fnv1a(std::string_view data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_double(double v)
{
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::hex);
    return std::string(buf.data(), end);
}

double parse_hex_double(std::string_view text)
{
    double v{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v, std::chars_format::hex);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw CheckpointError("malformed value '" + std::string(text) + "'");
    }
    return v;
}

void write_vector(std::ostringstream& out, std::string_view name, std::span<const double> values)
{
    out << name << ' ' << values.size() << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << hex_double(values[i]) << (i + 1 == values.size() ? "" : " ");
    }
    out << '\n';
}

class LineReader {
public:
    explicit LineReader(std::string_view text) : text_{text} {}

    std::string_view next()
    {
        if (text_.empty()) {
            throw CheckpointError("unexpected end of checkpoint");
        }
        const auto eol = text_.find('\n');
        const auto line = text_.substr(0, eol);
        text_ = eol == std::string_view::npos ? std::string_view{} : text_.substr(eol + 1);
        return line;
    }

    // "<name> <value>"
    std::string_view field(std::string_view name)
    {
        const auto line = next();
        if (!line.starts_with(name) || line.size() <= name.size() || line[name.size()] != ' ') {
            throw CheckpointError("expected field '" + std::string(name) + "'");
        }
        return line.substr(name.size() + 1);
    }

    std::size_t count(std::string_view name)
    {
        const auto v = field(name);
        std::size_t n{};
        const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc{} || end != v.data() + v.size()) {
            throw CheckpointError("malformed count for '" + std::string(name) + "'");
        }
        return n;
    }

    std::vector<double> vector(std::string_view name)
    {
        const auto n = count(name);
        auto line = next();
        std::vector<double> values;
        values.reserve(n);
        while (!line.empty()) {
            const auto sp = line.find(' ');
            values.push_back(parse_hex_double(line.substr(0, sp)));
            line = sp == std::string_view::npos ? std::string_view{} : line.substr(sp + 1);
        }
        if (values.size() != n) {
            throw CheckpointError("vector '" + std::string(name) + "' has wrong length");
        }
        return values;
    }

private:
    std::string_view text_;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt)
{
    std::ostringstream out;
    out << kMagic << " v" << kCheckpointVersion << '\n';
    out << "step " << ckpt.step << '\n';
    const auto config_text = format_config(ckpt.config);
    const auto lines = static_cast<std::size_t>(std::count(config_text.begin(), config_text.end(), '\n'));
    out << "config " << lines << '\n' << config_text;
    write_vector(out, "params", ckpt.params.weights());
    write_vector(out, "velocity", ckpt.velocity);
    out << "stream " << ckpt.trainer_stream.serialize() << '\n';
    auto body = out.str();

    std::array<char, 17> sum{};
    std::snprintf(sum.data(), sum.size(), "%016llx", static_cast<unsigned long long>(fnv1a(body)));
    body += "checksum ";
    body += sum.data();
    body += '\n';
    return body;
}

Checkpoint deserialize_checkpoint(std::string_view text)
{
    const auto marker = text.rfind("checksum ");
    if (marker == std::string_view::npos) {
        throw CheckpointError("checkpoint has no checksum");
    }
    const auto body = text.substr(0, marker);
    auto stored = text.substr(marker + 9);
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) {
        stored.remove_suffix(1);
    }
    std::array<char, 17> sum{};
    std::snprintf(sum.data(), sum.size(), "%016llx", static_cast<unsigned long long>(fnv1a(body)));
    if (stored != std::string_view(sum.data())) {
        throw CheckpointError("checkpoint checksum mismatch");
    }

    LineReader in{body};
    const auto header = in.next();
    if (!header.starts_with(kMagic)) {
        throw CheckpointError("not an icrlab checkpoint");
    }
    if (header != std::string(kMagic) + " v" + std::to_string(kCheckpointVersion)) {
        throw CheckpointError("unsupported checkpoint version: " + std::string(header));
    }

    Checkpoint ckpt;
    try {
        ckpt.step = static_cast<int>(parse_int(in.field("step")));
        const auto config_lines = in.count("config");
        std::string config_text;
        for (std::size_t i = 0; i < config_lines; ++i) {
            config_text += in.next();
            config_text += '\n';
        }
        ckpt.config = parse_config_text(config_text).config;
        validate(ckpt.config);
        const auto task = TaskSpec::from_config(ckpt.config);
        const auto layout = FeatureLayout::for_task(task, ckpt.config.position_buckets);
        ckpt.params = PolicyParams(layout, in.vector("params"));
        ckpt.velocity = in.vector("velocity");
        ckpt.trainer_stream = RandomStream::deserialize(in.field("stream"));
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path)
{
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw CheckpointError("cannot write checkpoint " + path.string());
        }
        out << serialize_checkpoint(checkpoint);
        if (!out) {
            throw CheckpointError("write failed for checkpoint " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw CheckpointError("cannot move checkpoint into place: " + ec.message());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot read checkpoint " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return deserialize_checkpoint(buffer.str());
}

}  // namespace icrlab
