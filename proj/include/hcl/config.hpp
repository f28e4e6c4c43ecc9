#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "hcl/contrastive.hpp"
#include "hcl/encoder.hpp"
#include "hcl/probe.hpp"
#include "hcl/viz.hpp"

namespace hcl {

struct EncoderConfig {
    std::size_t d_mid = 256;
    std::size_t d_h1 = 128;
    std::size_t d_out = 64;
    std::uint64_t seed = 1;
    bool normalize_embeddings = false;

    EncoderDims dims(std::size_t d_in) const { return {d_in, d_mid, d_h1, d_out}; }
};

// Everything a run needs besides the data. Unknown keys are rejected so
// typos surface as usage errors instead of silently using defaults.
struct ExperimentConfig {
    EncoderConfig encoder;
    TrainConfig train;
    ProbeConfig probe;
    ProjectionConfig viz;

    void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; throws ConfigError on bad values or unknown keys.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies "section.key=value" overrides (value parsed as JSON, falling back to a string).
void apply_override(nlohmann::json& doc, const std::string& assignment);

// FNV-1a over the canonical (sorted-key, compact) JSON dump.
std::string config_hash(const nlohmann::json& j);

Encoder make_encoder(const ExperimentConfig& cfg, std::size_t d_in);

}  // namespace hcl
