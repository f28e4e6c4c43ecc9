#pragma once

#include <filesystem>

#include <json.hpp>

#include "hcl/adam.hpp"
#include "hcl/encoder.hpp"

namespace hcl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Encoder encoder;
    AdamState optimizer;
    nlohmann::json metadata;  // free-form: config, training summary
};

// Writes `path` (binary, little-endian f64 payload) and `path + ".json"`
// (dims, seed, metadata and a hash of the binary payload).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hcl
