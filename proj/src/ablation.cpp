#include "hcl/ablation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>

#include "hcl/contrastive.hpp"
#include "hcl/error.hpp"
#include "hcl/synth.hpp"
#include "hcl/viz.hpp"

namespace hcl {

using nlohmann::json;

std::string_view to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::hierarchy_level: return "hierarchy_level";
        case AblationAxis::dataset_size: return "dataset_size";
        case AblationAxis::replay: return "replay";
    }
    return "?";
}

AblationAxis parse_axis(std::string_view text) {
    if (text == "hierarchy_level") return AblationAxis::hierarchy_level;
    if (text == "dataset_size") return AblationAxis::dataset_size;
    if (text == "replay") return AblationAxis::replay;
    throw ConfigError("unknown ablation axis '" + std::string(text) +
                      "' (expected hierarchy_level, dataset_size or replay)");
}

void AblationPlan::validate() const {
    if (values.empty()) throw ConfigError("ablation plan needs at least one value");
    if (repeats < 1) throw ConfigError("ablation repeats must be >= 1");
    base_config.validate();
    const auto presets = synth_preset_names();
    for (const auto& v : values) {
        switch (axis) {
            case AblationAxis::hierarchy_level:
                if (!v.is_number_integer() || v.get<int>() < 0)
                    throw ConfigError("hierarchy_level values must be integers >= 0");
                break;
            case AblationAxis::replay: {
                if (!v.is_number()) throw ConfigError("replay values must be numbers");
                const double r = v.get<double>();
                if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("replay values must lie in [0, 1]");
                break;
            }
            case AblationAxis::dataset_size:
                if (!v.is_string() ||
                    std::find(presets.begin(), presets.end(), v.get<std::string>()) == presets.end())
                    throw ConfigError("dataset_size values must be synthetic preset names");
                break;
        }
    }
    if (axis != AblationAxis::dataset_size && manifest.empty() &&
        std::find(presets.begin(), presets.end(), preset) == presets.end())
        throw ConfigError("unknown preset '" + preset + "'");
}

AblationPlan ablation_plan_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("ablation plan must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (key != "axis" && key != "values" && key != "config" && key != "repeats" &&
            key != "seed_policy" && key != "preset" && key != "manifest")
            throw ConfigError("unknown ablation plan key " + key);
    AblationPlan plan;
    if (!j.contains("axis") || !j.at("axis").is_string()) throw ConfigError("ablation plan needs an axis");
    plan.axis = parse_axis(j.at("axis").get<std::string>());
    if (!j.contains("values") || !j.at("values").is_array())
        throw ConfigError("ablation plan needs a values array");
    for (const auto& v : j.at("values")) plan.values.push_back(v);
    plan.base_config_json = j.value("config", json::object());
    plan.base_config = config_from_json(plan.base_config_json);
    if (j.contains("repeats")) {
        if (!j.at("repeats").is_number_integer()) throw ConfigError("repeats must be an integer");
        plan.repeats = j.at("repeats").get<int>();
    }
    const std::string policy = j.value("seed_policy", std::string("offset"));
    if (policy == "fixed") plan.seed_policy = SeedPolicy::fixed;
    else if (policy == "offset") plan.seed_policy = SeedPolicy::offset;
    else throw ConfigError("seed_policy must be fixed or offset");
    if (j.contains("preset")) plan.preset = j.at("preset").get<std::string>();
    if (j.contains("manifest")) {
        std::filesystem::path m = j.at("manifest").get<std::string>();
        plan.manifest = m.is_relative() && !base_dir.empty() ? base_dir / m : m;
    }
    plan.validate();
    return plan;
}

ProbeReport pretrain_and_probe(const Dataset& data, const ExperimentConfig& cfg, bool pretrain,
                               const std::string& model_name) {
    Encoder encoder = make_encoder(cfg, data.dim);
    if (pretrain) {
        const PoolMap pools = training_pools(data, cfg.train.pool_mode);
        TrainResult result = train(data, pools, std::move(encoder), cfg.train);
        if (result.aborted) throw NumericError("training aborted: " + result.abort_reason);
        encoder = std::move(result.encoder);
    }
    return run_probe(encoder, data, cfg.probe, model_name);
}

namespace {

std::string value_label(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
        return std::string(buf, res.ptr);
    }
    return v.dump();
}

ExperimentConfig config_for(const AblationPlan& plan, const json& value, int repeat) {
    ExperimentConfig cfg = plan.base_config;
    if (plan.axis == AblationAxis::hierarchy_level && value.get<int>() > 0) cfg.train.h_max = value.get<int>();
    if (plan.axis == AblationAxis::replay) cfg.train.r_p = value.get<double>();
    if (plan.seed_policy == SeedPolicy::offset) {
        const auto k = static_cast<std::uint64_t>(repeat);
        cfg.encoder.seed += k;
        cfg.train.seed += k;
        cfg.probe.seed += k;
    }
    return cfg;
}

}  // namespace

AblationReport run_ablation(const AblationPlan& plan, std::ostream* progress) {
    plan.validate();
    AblationReport report;
    report.axis = plan.axis;
    report.base_config = plan.base_config_json.is_null() ? to_json(plan.base_config) : plan.base_config_json;
    report.base_config_hash = config_hash(report.base_config);

    std::optional<Dataset> shared;
    std::string shared_error;
    if (plan.axis != AblationAxis::dataset_size) {
        try {
            shared = plan.manifest.empty() ? generate(synth_preset(plan.preset)) : load_manifest(plan.manifest);
        } catch (const std::exception& e) {
            shared_error = e.what();
        }
    }

    for (const auto& value : plan.values) {
        AblationRow row;
        row.value = value;
        row.label = value_label(value);
        std::optional<Dataset> own;
        std::string data_error = shared_error;
        if (plan.axis == AblationAxis::dataset_size) {
            try {
                own = generate(synth_preset(value.get<std::string>()));
            } catch (const std::exception& e) {
                data_error = e.what();
            }
        }
        const Dataset* data = own ? &*own : (shared ? &*shared : nullptr);
        double sum_map = 0.0, sum_star = 0.0;
        int ok = 0;
        for (int r = 0; r < plan.repeats; ++r) {
            AblationRun run;
            run.repeat = r;
            if (!data) {
                run.error = data_error;
            } else {
                try {
                    const ExperimentConfig cfg = config_for(plan, value, r);
                    const bool pretrain =
                        !(plan.axis == AblationAxis::hierarchy_level && value.get<int>() == 0);
                    const std::string name = std::string(to_string(plan.axis)) + "=" + row.label +
                                             "#" + std::to_string(r);
                    run.report = pretrain_and_probe(*data, cfg, pretrain, name);
                    run.ok = true;
                    sum_map += run.report->mAP;
                    sum_star += run.report->mAP_star;
                    ++ok;
                } catch (const std::exception& e) {
                    run.error = e.what();
                }
            }
            if (progress) {
                *progress << to_string(plan.axis) << '=' << row.label << " repeat " << r << ": ";
                if (run.ok) *progress << "mAP* " << run.report->mAP_star << '\n';
                else *progress << "failed: " << run.error << '\n';
            }
            row.runs.push_back(std::move(run));
        }
        if (ok > 0) {
            row.mAP = sum_map / ok;
            row.mAP_star = sum_star / ok;
        }
        report.rows.push_back(std::move(row));
    }

    double best = 0.0;
    for (const auto& row : report.rows)
        if (row.mAP_star) best = std::max(best, *row.mAP_star);
    for (auto& row : report.rows)
        if (row.mAP_star) row.relative_mAP_star = best > 0.0 ? (best - *row.mAP_star) / best : 0.0;
    return report;
}

json AblationReport::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
        json runs_json = json::array();
        for (const auto& run : row.runs) {
            json r = {{"repeat", run.repeat}, {"ok", run.ok}};
            if (run.ok) r["report"] = run.report->to_json();
            else r["error"] = run.error;
            runs_json.push_back(std::move(r));
        }
        auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        rows_json.push_back({{"value", row.value},
                             {"label", row.label},
                             {"mAP", opt(row.mAP)},
                             {"mAP_star", opt(row.mAP_star)},
                             {"relative_mAP_star", opt(row.relative_mAP_star)},
                             {"runs", std::move(runs_json)}});
    }
    return {{"axis", std::string(hcl::to_string(axis))},
            {"base_config", base_config},
            {"base_config_hash", base_config_hash},
            {"rows", std::move(rows_json)}};
}

std::vector<std::filesystem::path> write_ablation_report(const AblationReport& report,
                                                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / "ablation.csv";
    const auto svg_path = dir / "ablation.svg";
    const auto json_path = dir / "ablation.json";

    auto num = [](const std::optional<double>& v) -> std::string {
        if (!v) return "";
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, *v);
        return std::string(buf, res.ptr);
    };
    {
        std::ofstream out(csv_path);
        if (!out) throw DataError("cannot write " + csv_path.string());
        out << "# base_config_hash=" << report.base_config_hash << '\n';
        out << "axis,value,mAP,mAP_star,relative_mAP_star,ok_runs,failed_runs\n";
        for (const auto& row : report.rows) {
            const auto ok = std::count_if(row.runs.begin(), row.runs.end(), [](const auto& r) { return r.ok; });
            out << to_string(report.axis) << ',' << row.label << ',' << num(row.mAP) << ','
                << num(row.mAP_star) << ',' << num(row.relative_mAP_star) << ',' << ok << ','
                << (static_cast<long>(row.runs.size()) - ok) << '\n';
        }
        if (!out) throw DataError("write failed: " + csv_path.string());
    }
    {
        std::vector<double> xs, ys;
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < report.rows.size(); ++i) {
            const auto& row = report.rows[i];
            if (!row.relative_mAP_star) continue;
            xs.push_back(row.value.is_number() ? row.value.get<double>() : static_cast<double>(i));
            ys.push_back(*row.relative_mAP_star);
            labels.push_back(row.label);
        }
        std::ofstream out(svg_path);
        if (!out) throw DataError("cannot write " + svg_path.string());
        out << render_line_svg(xs, ys, labels, "ablation: " + std::string(to_string(report.axis)),
                               "relative mAP*");
    }
    {
        std::ofstream out(json_path);
        if (!out) throw DataError("cannot write " + json_path.string());
        out << report.to_json().dump(2) << '\n';
    }
    return {csv_path, svg_path, json_path};
}

}  // namespace hcl
