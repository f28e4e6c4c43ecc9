#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcl/config.hpp"
#include "hcl/hierarchy.hpp"
#include "hcl/probe.hpp"

namespace hcl {

enum class AblationAxis { hierarchy_level, dataset_size, replay };
std::string_view to_string(AblationAxis axis);
AblationAxis parse_axis(std::string_view text);  // throws ConfigError

// fixed: every repeat reuses the base seeds. offset: repeat k adds k to the
// encoder, train and probe seeds.
enum class SeedPolicy { fixed, offset };

struct AblationPlan {
    AblationAxis axis = AblationAxis::replay;
    // hierarchy_level: integers (0 = no pretraining), replay: reals in [0,1],
    // dataset_size: synthetic preset names.
    std::vector<nlohmann::json> values;
    ExperimentConfig base_config;
    nlohmann::json base_config_json;  // as written by the user, hashed verbatim
    int repeats = 1;
    SeedPolicy seed_policy = SeedPolicy::offset;
    std::string preset = "depth2";       // dataset when not varying dataset_size
    std::filesystem::path manifest;    // overrides preset when set

    void validate() const;  // throws ConfigError
};

AblationPlan ablation_plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct AblationRun {
    int repeat = 0;
    bool ok = false;
    std::string error;
    std::optional<ProbeReport> report;
};

struct AblationRow {
    nlohmann::json value;
    std::string label;
    std::vector<AblationRun> runs;
    std::optional<double> mAP;       // mean over successful repeats
    std::optional<double> mAP_star;
    std::optional<double> relative_mAP_star;  // (best - this) / best
};

struct AblationReport {
    AblationAxis axis = AblationAxis::replay;
    nlohmann::json base_config;
    std::string base_config_hash;
    std::vector<AblationRow> rows;

    nlohmann::json to_json() const;
};

// Pretrains (unless `pretrain` is false) and probes one configuration.
// Throws on failure; an aborted training run is reported as NumericError.
ProbeReport pretrain_and_probe(const Dataset& data, const ExperimentConfig& cfg, bool pretrain,
                               const std::string& model_name);

// Runs every value x repeat. Failed sub-runs are recorded and the rest continue.
AblationReport run_ablation(const AblationPlan& plan, std::ostream* progress = nullptr);

// Writes ablation.csv, ablation.svg and ablation.json into dir.
std::vector<std::filesystem::path> write_ablation_report(const AblationReport& report,
                                                         const std::filesystem::path& dir);

}  // namespace hcl
