#pragma once

#include "icrlab/core.hpp"
#include "icrlab/policy.hpp"

#include <filesystem>

namespace icrlab {

inline constexpr int kCheckpointVersion = 1;

// Everything needed to resume a run bit-exactly.
struct Checkpoint {
    TrainConfig config;
    int step{0};
    PolicyParams params;
    std::vector<double> velocity;  // momentum buffer, empty when momentum is off
    RandomStream trainer_stream;

    bool operator==(const Checkpoint&) const = default;
};

// Text container: version header, resolved config, hex-float parameter and optimizer
// vectors, stream state and a trailing FNV-1a checksum. Throws CheckpointError.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view text);

}  // namespace icrlab
