// hcl: command-line front end for the hierarchical contrastive toolkit.
// Exit codes: 0 ok, 1 runtime failure, 2 config/usage error.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcl/ablation.hpp"
#include "hcl/checkpoint.hpp"
#include "hcl/config.hpp"
#include "hcl/contrastive.hpp"
#include "hcl/error.hpp"
#include "hcl/feature_io.hpp"
#include "hcl/hierarchy.hpp"
#include "hcl/probe.hpp"
#include "hcl/synth.hpp"
#include "hcl/viz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path default_out(const std::string& sub) {
    if (const char* env = std::getenv("HCL_OUT_DIR"); env && *env) return fs::path(env) / sub;
    return fs::path("out") / sub;
}

// Config files are usage errors when broken; data files are runtime errors.
template <typename Error = hcl::ConfigError>
json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(path.string() + " is not valid JSON: " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw hcl::DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw hcl::DataError("write failed: " + path.string());
}

// The config document as given (plus overrides) and its parsed form.
struct LoadedConfig {
    json doc = json::object();
    hcl::ExperimentConfig cfg;
};

LoadedConfig load_config_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
    LoadedConfig lc;
    if (!path.empty()) lc.doc = read_json_file(path);
    for (const auto& s : sets) hcl::apply_override(lc.doc, s);
    lc.cfg = hcl::config_from_json(lc.doc);
    return lc;
}

json config_block(const LoadedConfig& lc) {
    return {{"source", lc.doc}, {"effective", hcl::to_json(lc.cfg)}, {"hash", hcl::config_hash(lc.doc)}};
}

std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 4);
    return std::string(buf, res.ptr);
}

// ---- ingest ----------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> read_pairs_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw hcl::DataError("cannot open " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw hcl::DataError(path.string() + ":" + std::to_string(lineno) + ": expected id,value");
        out.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
    return out;
}

struct IngestOptions {
    std::string root;
    std::string features;
    std::string labels;
    std::string splits;
    std::string out;
    std::string format = "binary";
};

// Directories become concept nodes, regular files become images. Ids are
// paths relative to the root, with '/' separators; the root node is "root".
int run_ingest(const IngestOptions& o) {
    const fs::path root(o.root);
    if (!fs::is_directory(root)) throw hcl::ConfigError("not a directory: " + o.root);

    std::map<std::string, hcl::NodeSpec> specs;
    specs["root"] = {"root", root.filename().string(), std::nullopt, {}};
    std::vector<fs::path> entries;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it)
        entries.push_back(it->path());
    std::sort(entries.begin(), entries.end());
    for (const auto& p : entries) {
        const std::string name = p.filename().string();
        if (!name.empty() && name[0] == '.') continue;
        const std::string rel = fs::relative(p, root).generic_string();
        const fs::path parent_rel = fs::relative(p.parent_path(), root);
        const std::string parent = parent_rel == "." ? "root" : parent_rel.generic_string();
        if (fs::is_directory(p)) {
            specs[rel] = {rel, name, parent, {}};
        } else if (fs::is_regular_file(p)) {
            specs.at(parent).images.push_back(rel);
        }
    }
    hcl::Dataset data;
    std::vector<hcl::NodeSpec> list;
    for (auto& [id, s] : specs) list.push_back(std::move(s));
    data.tree = hcl::ConceptTree::build(std::move(list));

    const hcl::FeatureTable table = hcl::read_feature_csv(o.features);
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < table.ids.size(); ++i) row_of[table.ids[i]] = i;
    std::set<std::string> images;
    for (const auto& [id, node] : data.tree.nodes())
        images.insert(node.owned_images.begin(), node.owned_images.end());
    data.dim = table.values.cols();
    for (const auto& id : images) {
        auto it = row_of.find(id);
        if (it == row_of.end()) throw hcl::DataError("no features for image " + id);
        auto row = table.values.row(it->second);
        data.records.push_back({id, std::vector<double>(row.begin(), row.end()), std::nullopt,
                                hcl::Split::pretrain});
    }
    data.reindex();

    if (!o.labels.empty()) {
        const auto pairs = read_pairs_csv(o.labels);
        std::set<std::string> names;
        for (const auto& [id, cls] : pairs) names.insert(cls);
        data.class_names.assign(names.begin(), names.end());
        for (const auto& [id, cls] : pairs) {
            const auto idx = data.find(id);
            if (!idx) throw hcl::DataError("label for unknown image " + id);
            data.records[*idx].label = static_cast<int>(
                std::lower_bound(data.class_names.begin(), data.class_names.end(), cls) -
                data.class_names.begin());
        }
    }
    if (!o.splits.empty()) {
        for (const auto& [id, split] : read_pairs_csv(o.splits)) {
            const auto idx = data.find(id);
            if (!idx) throw hcl::DataError("split for unknown image " + id);
            data.records[*idx].split = hcl::parse_split(split);
        }
    }

    hcl::ManifestWriteOptions wo;
    if (o.format == "csv") {
        wo.format = hcl::FeatureFormat::csv;
        wo.features_file = "features.csv";
    }
    const fs::path out(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    hcl::write_manifest(data, out, wo);
    std::cout << "wrote " << out.string() << " (" << data.tree.size() << " nodes, " << data.records.size()
              << " images, dim " << data.dim << ")\n";
    return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthOptions {
    std::string preset = "depth2";
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "binary";
};

int run_synth(const SynthOptions& o) {
    hcl::SynthSpec spec = o.spec.empty() ? hcl::synth_preset(o.preset)
                                         : hcl::synth_spec_from_json(read_json_file(o.spec));
    if (o.seed) spec.seed = *o.seed;
    spec.validate();
    const hcl::Dataset data = hcl::generate(spec);
    const fs::path dir = o.out.empty() ? default_out("synth") : fs::path(o.out);
    fs::create_directories(dir);
    hcl::ManifestWriteOptions wo;
    if (o.format == "csv") {
        wo.format = hcl::FeatureFormat::csv;
        wo.features_file = "features.csv";
    }
    hcl::write_manifest(data, dir / "manifest.json", wo);
    write_json_file(dir / "synth_spec.json", hcl::to_json(spec));
    std::cout << "wrote " << (dir / "manifest.json").string() << " (" << data.tree.size() << " nodes, "
              << data.records.size() << " images, depth " << data.tree.depth() << ")\n";
    return 0;
}

// ---- train -----------------------------------------------------------------

struct CommonRun {
    std::string manifest;
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

int run_train(const CommonRun& o) {
    const LoadedConfig lc = load_config_with_overrides(o.config, o.sets);
    const hcl::Dataset data = hcl::load_manifest(o.manifest);
    const fs::path dir = o.out.empty() ? default_out("train") : fs::path(o.out);
    fs::create_directories(dir);

    const hcl::PoolMap pools = hcl::training_pools(data, lc.cfg.train.pool_mode);
    hcl::check_split_hygiene(pools, data);
    hcl::TrainResult result = hcl::train(data, pools, hcl::make_encoder(lc.cfg, data.dim), lc.cfg.train);

    {
        std::ofstream log(dir / "train_log.jsonl");
        if (!log) throw hcl::DataError("cannot write " + (dir / "train_log.jsonl").string());
        hcl::write_train_log(result.log, log);
    }
    json meta = {{"config", config_block(lc)},
                 {"manifest", fs::path(o.manifest).filename().string()},
                 {"trained_levels", result.trained_levels},
                 {"aborted", result.aborted}};
    if (result.aborted) meta["abort_reason"] = result.abort_reason;
    hcl::save_checkpoint(dir / "model.bin", {result.encoder, result.optimizer, meta});
    write_json_file(dir / "config.json", hcl::to_json(lc.cfg));

    if (result.aborted) {
        std::cerr << "hcl train: aborted, last good state saved to " << (dir / "model.bin").string() << ": "
                  << result.abort_reason << '\n';
        return 1;
    }
    std::cout << "trained levels";
    for (int h : result.trained_levels) std::cout << ' ' << h;
    std::cout << "; checkpoint " << (dir / "model.bin").string() << '\n';
    return 0;
}

// Encoder from a checkpoint, or an untrained one built from the config.
struct EncoderSource {
    hcl::Encoder encoder;
    json provenance;
};

EncoderSource encoder_for(const std::string& checkpoint, const LoadedConfig& lc, std::size_t d_in) {
    if (checkpoint.empty())
        return {hcl::make_encoder(lc.cfg, d_in), {{"checkpoint", nullptr}, {"untrained", true}}};
    hcl::Checkpoint ck = hcl::load_checkpoint(checkpoint);
    if (ck.encoder.dims().d_in != d_in)
        throw hcl::DataError("checkpoint expects d_in " + std::to_string(ck.encoder.dims().d_in) +
                             " but the manifest has " + std::to_string(d_in));
    return {std::move(ck.encoder),
            {{"checkpoint", fs::path(checkpoint).filename().string()}, {"untrained", false}}};
}

// ---- probe -----------------------------------------------------------------

struct ProbeOptions : CommonRun {
    std::string checkpoint;
    std::string name;
};

int run_probe_cmd(const ProbeOptions& o) {
    const LoadedConfig lc = load_config_with_overrides(o.config, o.sets);
    const hcl::Dataset data = hcl::load_manifest(o.manifest);
    const EncoderSource src = encoder_for(o.checkpoint, lc, data.dim);
    const std::string name =
        !o.name.empty() ? o.name : (o.checkpoint.empty() ? "untrained" : fs::path(o.checkpoint).stem().string());
    const hcl::ProbeReport report = hcl::run_probe(src.encoder, data, lc.cfg.probe, name);

    json j = report.to_json();
    j["encoder"] = src.provenance;
    j["config"] = config_block(lc);
    const fs::path dir = o.out.empty() ? default_out("probe") : fs::path(o.out);
    write_json_file(dir / "probe_report.json", j);
    std::cout << name << ": mAP " << fmt(report.mAP) << "  mAP* " << fmt(report.mAP_star) << "  accuracy "
              << fmt(report.accuracy) << "  (n_val " << report.n_val << ")\n";
    return 0;
}

// ---- embed -----------------------------------------------------------------

struct EmbedOptions : CommonRun {
    std::string checkpoint;
    std::string split;
};

int run_embed(const EmbedOptions& o) {
    const LoadedConfig lc = load_config_with_overrides(o.config, o.sets);
    const hcl::Dataset data = hcl::load_manifest(o.manifest);
    const EncoderSource src = encoder_for(o.checkpoint, lc, data.dim);
    std::optional<hcl::Split> only;
    if (!o.split.empty()) only = hcl::parse_split(o.split);

    hcl::FeatureTable table;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.records.size(); ++i)
        if (!only || data.records[i].split == *only) rows.push_back(i);
    const hcl::Matrix all = data.feature_matrix();
    table.values = src.encoder.encode(hcl::gather_rows(all, rows));
    for (auto i : rows) table.ids.push_back(data.records[i].id);

    const fs::path path = o.out.empty() ? default_out("embed") / "embeddings.csv" : fs::path(o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    hcl::write_feature_csv(path, table);
    std::cout << "wrote " << rows.size() << " embeddings of dim " << table.values.cols() << " to "
              << path.string() << '\n';
    return 0;
}

// ---- viz -------------------------------------------------------------------

struct VizOptions : CommonRun {
    std::string checkpoint;
    std::string color_by = "both";
    bool skip_pca = false;
};

int run_viz(const VizOptions& o) {
    LoadedConfig lc = load_config_with_overrides(o.config, o.sets);
    if (o.skip_pca) lc.cfg.viz.skip_pca = true;
    const hcl::Dataset data = hcl::load_manifest(o.manifest);
    const EncoderSource src = encoder_for(o.checkpoint, lc, data.dim);

    hcl::ColorBy color = hcl::ColorBy::both;
    if (o.color_by == "level1") color = hcl::ColorBy::level1;
    else if (o.color_by == "class") color = hcl::ColorBy::probe_class;

    const hcl::Matrix emb = src.encoder.encode(data.feature_matrix());
    const hcl::Projection proj = hcl::project(emb, lc.cfg.viz);
    const auto level1 = hcl::level1_concepts(data);
    std::vector<hcl::ProjectionRow> rows;
    rows.reserve(data.records.size());
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& rec = data.records[i];
        std::string cls;
        if (rec.label && *rec.label >= 0 && static_cast<std::size_t>(*rec.label) < data.class_names.size())
            cls = data.class_names[*rec.label];
        rows.push_back({rec.id, proj.coords(i, 0), proj.coords(i, 1), level1[i], cls});
    }
    const fs::path dir = o.out.empty() ? default_out("viz") : fs::path(o.out);
    const auto files = hcl::export_projection(dir, rows, color);

    json kl = json::array();
    for (const auto& s : proj.kl_trace)
        kl.push_back({{"iteration", s.iteration}, {"kl", s.kl}, {"exaggerated", s.exaggerated}});
    write_json_file(dir / "projection_meta.json",
                    {{"encoder", src.provenance},
                     {"config", config_block(lc)},
                     {"pca_dim_used", proj.pca_dim_used},
                     {"explained_variance_ratio", proj.explained_variance_ratio},
                     {"kl_trace", kl},
                     {"final_kl", proj.final_kl}});
    std::cout << "projected " << rows.size() << " points (final KL " << fmt(proj.final_kl) << ") into "
              << dir.string() << '\n';
    return 0;
}

// ---- ablate ----------------------------------------------------------------

struct AblateOptions {
    std::string plan;
    std::string axis;
    std::vector<std::string> values;
    std::string preset;
    std::string manifest;
    std::string config;
    std::vector<std::string> sets;
    int repeats = 0;
    std::string out;
};

int run_ablate(const AblateOptions& o) {
    json plan_doc = o.plan.empty() ? json::object() : read_json_file(o.plan);
    if (!o.axis.empty()) plan_doc["axis"] = o.axis;
    if (!o.values.empty()) {
        json vals = json::array();
        for (const auto& v : o.values) {
            try {
                vals.push_back(json::parse(v));
            } catch (const json::parse_error&) {
                vals.push_back(v);
            }
        }
        plan_doc["values"] = vals;
    }
    if (!o.preset.empty()) plan_doc["preset"] = o.preset;
    if (!o.manifest.empty()) plan_doc["manifest"] = fs::absolute(o.manifest).string();
    if (o.repeats > 0) plan_doc["repeats"] = o.repeats;
    if (!o.config.empty()) plan_doc["config"] = read_json_file(o.config);
    if (!o.sets.empty()) {
        json cfg = plan_doc.value("config", json::object());
        for (const auto& s : o.sets) hcl::apply_override(cfg, s);
        plan_doc["config"] = cfg;
    }
    const fs::path base = o.plan.empty() ? fs::path() : fs::path(o.plan).parent_path();
    const hcl::AblationPlan plan = hcl::ablation_plan_from_json(plan_doc, base);
    const hcl::AblationReport report = hcl::run_ablation(plan, &std::cerr);
    const fs::path dir = o.out.empty() ? default_out("ablate") : fs::path(o.out);
    hcl::write_ablation_report(report, dir);

    std::cout << std::left << std::setw(24) << to_string(plan.axis) << std::setw(10) << "mAP" << std::setw(10)
              << "mAP*" << "relative mAP*\n";
    bool any_failed = false;
    for (const auto& row : report.rows) {
        std::cout << std::setw(24) << row.label;
        if (row.mAP_star)
            std::cout << std::setw(10) << fmt(*row.mAP) << std::setw(10) << fmt(*row.mAP_star)
                      << fmt(*row.relative_mAP_star) << '\n';
        else
            std::cout << "failed\n";
        for (const auto& r : row.runs) any_failed |= !r.ok;
    }
    std::cout << "base_config_hash " << report.base_config_hash << "; report in " << dir.string() << '\n';
    return any_failed ? 1 : 0;
}

// ---- report ----------------------------------------------------------------

int run_report(const std::vector<std::string>& inputs, const std::string& csv_path) {
    std::vector<hcl::ProbeReport> reports;
    std::vector<std::string> classes;
    for (const auto& in : inputs) {
        json j = read_json_file<hcl::DataError>(in);
        try {
            reports.push_back(hcl::ProbeReport::from_json(j));
        } catch (const json::exception& e) {
            throw hcl::DataError(in + " is not a probe report: " + e.what());
        }
        for (const auto& c : reports.back().class_names)
            if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
    }
    auto ap_for = [](const hcl::ProbeReport& r, const std::string& c) -> std::optional<double> {
        for (std::size_t i = 0; i < r.class_names.size(); ++i)
            if (r.class_names[i] == c) return r.per_class_ap[i];
        return std::nullopt;
    };

    std::size_t name_w = 5;
    for (const auto& r : reports) name_w = std::max(name_w, r.model_name.size());
    std::cout << std::left << std::setw(static_cast<int>(name_w + 2)) << "model" << std::setw(9) << "mAP"
              << std::setw(9) << "mAP*";
    for (const auto& c : classes) std::cout << std::setw(static_cast<int>(std::max<std::size_t>(c.size(), 6) + 2)) << c;
    std::cout << '\n';
    for (const auto& r : reports) {
        std::cout << std::setw(static_cast<int>(name_w + 2)) << r.model_name << std::setw(9) << fmt(r.mAP)
                  << std::setw(9) << fmt(r.mAP_star);
        for (const auto& c : classes) {
            const auto ap = ap_for(r, c);
            std::cout << std::setw(static_cast<int>(std::max<std::size_t>(c.size(), 6) + 2))
                      << (ap ? fmt(*ap) : std::string("-"));
        }
        std::cout << '\n';
    }

    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw hcl::DataError("cannot write " + csv_path);
        out << "model,mAP,mAP_star";
        for (const auto& c : classes) out << ',' << c;
        out << '\n';
        for (const auto& r : reports) {
            out << r.model_name << ',' << fmt(r.mAP) << ',' << fmt(r.mAP_star);
            for (const auto& c : classes) {
                const auto ap = ap_for(r, c);
                out << ',' << (ap ? fmt(*ap) : std::string());
            }
            out << '\n';
        }
    }
    return 0;
}

void add_common(CLI::App* sub, CommonRun& o, bool need_manifest = true,
                const char* out_help = "output directory (default $HCL_OUT_DIR/<command>)") {
    auto* m = sub->add_option("--manifest,-m", o.manifest, "dataset manifest (JSON)");
    if (need_manifest) m->required()->check(CLI::ExistingFile);
    sub->add_option("--config,-c", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--set", o.sets, "override a config value, e.g. train.r_p=0.2");
    sub->add_option("--out,-o", o.out, out_help);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hcl - hierarchical contrastive pretraining and probing"};
    app.require_subcommand(1);

    IngestOptions ingest;
    auto* c_ingest = app.add_subcommand("ingest", "build a manifest from a directory tree plus a feature CSV");
    c_ingest->add_option("--root", ingest.root, "directory whose subdirectories are concepts")->required();
    c_ingest->add_option("--features", ingest.features, "CSV: image_id,v0,v1,...")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--labels", ingest.labels, "CSV: image_id,class")->check(CLI::ExistingFile);
    c_ingest->add_option("--splits", ingest.splits, "CSV: image_id,pretrain|probe_train|probe_val")->check(CLI::ExistingFile);
    c_ingest->add_option("--out,-o", ingest.out, "manifest path")->required();
    c_ingest->add_option("--format", ingest.format, "feature file format")->check(CLI::IsMember({"binary", "csv"}));

    SynthOptions synth;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic hierarchical dataset");
    c_synth->add_option("--preset", synth.preset, "preset name")->check(CLI::IsMember(hcl::synth_preset_names()));
    c_synth->add_option("--spec", synth.spec, "JSON synth spec (overrides --preset)")->check(CLI::ExistingFile);
    c_synth->add_option("--seed", synth.seed, "override the generator seed");
    c_synth->add_option("--out,-o", synth.out, "output directory");
    c_synth->add_option("--format", synth.format, "feature file format")->check(CLI::IsMember({"binary", "csv"}));

    CommonRun train;
    auto* c_train = app.add_subcommand("train", "hierarchical contrastive pretraining");
    add_common(c_train, train);

    ProbeOptions probe;
    auto* c_probe = app.add_subcommand("probe", "linear-probe evaluation of a frozen encoder");
    add_common(c_probe, probe);
    c_probe->add_option("--checkpoint", probe.checkpoint, "model.bin (omit for the untrained baseline)")
        ->check(CLI::ExistingFile);
    c_probe->add_option("--name", probe.name, "model name in the report");

    EmbedOptions embed;
    auto* c_embed = app.add_subcommand("embed", "write embeddings as CSV");
    add_common(c_embed, embed, true, "output CSV path (default $HCL_OUT_DIR/embed/embeddings.csv)");
    c_embed->add_option("--checkpoint", embed.checkpoint, "model.bin (omit for the untrained encoder)")
        ->check(CLI::ExistingFile);
    c_embed->add_option("--split", embed.split, "only this split")
        ->check(CLI::IsMember({"pretrain", "probe_train", "probe_val"}));

    VizOptions viz;
    auto* c_viz = app.add_subcommand("viz", "PCA then t-SNE projection of the embeddings");
    add_common(c_viz, viz);
    c_viz->add_option("--checkpoint", viz.checkpoint, "model.bin (omit for the untrained encoder)")
        ->check(CLI::ExistingFile);
    c_viz->add_option("--color-by", viz.color_by, "level1, class or both")
        ->check(CLI::IsMember({"level1", "class", "both"}));
    c_viz->add_flag("--skip-pca", viz.skip_pca, "run t-SNE directly on the embeddings");

    AblateOptions ablate;
    auto* c_ablate = app.add_subcommand("ablate", "sweep one parameter: pretrain + probe per value");
    c_ablate->add_option("--plan", ablate.plan, "ablation plan (JSON)")->check(CLI::ExistingFile);
    c_ablate->add_option("--axis", ablate.axis, "hierarchy_level, dataset_size or replay")
        ->check(CLI::IsMember({"hierarchy_level", "dataset_size", "replay"}));
    c_ablate->add_option("--values", ablate.values, "values along the axis");
    c_ablate->add_option("--preset", ablate.preset, "synthetic dataset preset");
    c_ablate->add_option("--manifest,-m", ablate.manifest, "dataset manifest")->check(CLI::ExistingFile);
    c_ablate->add_option("--config,-c", ablate.config, "base experiment config")->check(CLI::ExistingFile);
    c_ablate->add_option("--set", ablate.sets, "override a base config value");
    c_ablate->add_option("--repeats", ablate.repeats, "runs per value");
    c_ablate->add_option("--out,-o", ablate.out, "output directory");

    std::vector<std::string> report_inputs;
    std::string report_csv;
    auto* c_report = app.add_subcommand("report", "tabulate probe reports");
    c_report->add_option("reports", report_inputs, "probe_report.json files")->required()->check(CLI::ExistingFile);
    c_report->add_option("--csv", report_csv, "also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_ingest) return run_ingest(ingest);
        if (*c_synth) return run_synth(synth);
        if (*c_train) return run_train(train);
        if (*c_probe) return run_probe_cmd(probe);
        if (*c_embed) return run_embed(embed);
        if (*c_viz) return run_viz(viz);
        if (*c_ablate) return run_ablate(ablate);
        if (*c_report) return run_report(report_inputs, report_csv);
    } catch (const hcl::ConfigError& e) {
        std::cerr << "hcl: config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "hcl: invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "hcl: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
