#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hcl/hierarchy.hpp"

namespace hcl {

// Hierarchical Gaussian mixture. Every node at level h sits at distance
// level_scales[h-1] from its parent's center; leaf images are the leaf
// center plus isotropic noise. Structure lives in the first `signal_dim`
// coordinates; the rest carry nuisance noise only.
struct SynthSpec {
    int depth = 2;
    std::vector<int> branching{3, 3};
    int images_per_leaf = 40;
    std::size_t d_in = 32;
    std::vector<double> level_scales{8.0, 3.0};
    std::uint64_t seed = 7;

    double noise_scale = 1.0;
    std::size_t signal_dim = 0;  // 0 means all of d_in
    double nuisance_scale = 0.0;
    int internal_images_per_node = 0;  // images owned directly by non-leaf, non-root nodes
    double share_probability = 0.0;    // chance a leaf image is also filed under its parent
    double image_count_skew = 0.0;     // leaf k gets images_per_leaf * exp(-skew * k / (L-1))
    // Several instances of the same concept hierarchy, merged node-by-node
    // under one root; instance_scale perturbs each instance's centers.
    int instances = 1;
    double instance_scale = 0.0;
    double probe_train_fraction = 0.3;
    double probe_val_fraction = 0.2;

    void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

// Deterministic in spec.seed. Features are rounded to float32 so a dataset
// written to disk and read back is identical to the in-memory one.
Dataset generate(const SynthSpec& spec);

// Named presets: small, medium, large (1, 7, 20 instances), depth2, forgetting.
SynthSpec synth_preset(std::string_view name);
std::vector<std::string> synth_preset_names();

}  // namespace hcl
