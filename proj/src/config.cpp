#include "hcl/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "hcl/error.hpp"

namespace hcl {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, const std::set<std::string>& known, const std::string& where) {
    if (!section.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : section.items())
        if (!known.count(key)) throw ConfigError("unknown config key " + where + "." + key);
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config value " + where + "." + key + " has the wrong type");
    }
}

std::string pool_mode_name(PoolMode m) { return m == PoolMode::descendant ? "descendant" : "owned_only"; }
std::string map_star_name(MapStarMode m) { return m == MapStarMode::pooled ? "pooled" : "class_weighted"; }

}  // namespace

void ExperimentConfig::validate() const {
    if (encoder.d_mid == 0 || encoder.d_h1 == 0 || encoder.d_out == 0)
        throw ConfigError("encoder dimensions must be positive");
    train.validate();
    probe.validate();
    if (viz.pca_dim < 1) throw ConfigError("viz.pca_dim must be >= 1");
    if (!(viz.tsne.perplexity > 0.0)) throw ConfigError("viz.perplexity must be positive");
    if (viz.tsne.iterations < 1) throw ConfigError("viz.iterations must be >= 1");
    if (!(viz.tsne.early_exaggeration >= 1.0)) throw ConfigError("viz.early_exaggeration must be >= 1");
    if (viz.tsne.exaggeration_iters < 0) throw ConfigError("viz.exaggeration_iters must be >= 0");
    if (!(viz.tsne.learning_rate >= 0.0)) throw ConfigError("viz.learning_rate must be >= 0 (0 picks it from n)");
}

json to_json(const ExperimentConfig& c) {
    return {{"encoder",
             {{"d_mid", c.encoder.d_mid},
              {"d_h1", c.encoder.d_h1},
              {"d_out", c.encoder.d_out},
              {"seed", c.encoder.seed},
              {"normalize_embeddings", c.encoder.normalize_embeddings}}},
            {"train",
             {{"h_max", c.train.h_max},
              {"alpha_min", c.train.alpha_min},
              {"r_p", c.train.r_p},
              {"learning_rate", c.train.learning_rate},
              {"triplet_batch_size", c.train.triplet_batch_size},
              {"steps_per_level", c.train.steps_per_level},
              {"seed", c.train.seed},
              {"adaptive_h_max", c.train.adaptive_h_max},
              {"retry_budget", c.train.retry_budget},
              {"pool_mode", pool_mode_name(c.train.pool_mode)}}},
            {"probe",
             {{"batch_size", c.probe.batch_size},
              {"epochs", c.probe.epochs},
              {"learning_rate", c.probe.learning_rate},
              {"seed", c.probe.seed},
              {"map_star", map_star_name(c.probe.map_star)}}},
            {"viz",
             {{"pca_dim", c.viz.pca_dim},
              {"skip_pca", c.viz.skip_pca},
              {"perplexity", c.viz.tsne.perplexity},
              {"iterations", c.viz.tsne.iterations},
              {"early_exaggeration", c.viz.tsne.early_exaggeration},
              {"exaggeration_iters", c.viz.tsne.exaggeration_iters},
              {"learning_rate", c.viz.tsne.learning_rate},
              {"momentum_switch_iter", c.viz.tsne.momentum_switch_iter},
              {"seed", c.viz.tsne.seed}}}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j, {"encoder", "train", "probe", "viz"}, "config");
    if (j.contains("encoder")) {
        const auto& s = j.at("encoder");
        reject_unknown(s, {"d_mid", "d_h1", "d_out", "seed", "normalize_embeddings"}, "encoder");
        read(s, "d_mid", c.encoder.d_mid, "encoder");
        read(s, "d_h1", c.encoder.d_h1, "encoder");
        read(s, "d_out", c.encoder.d_out, "encoder");
        read(s, "seed", c.encoder.seed, "encoder");
        read(s, "normalize_embeddings", c.encoder.normalize_embeddings, "encoder");
    }
    if (j.contains("train")) {
        const auto& s = j.at("train");
        reject_unknown(s, {"h_max", "alpha_min", "r_p", "learning_rate", "triplet_batch_size",
                           "steps_per_level", "seed", "adaptive_h_max", "retry_budget", "pool_mode"},
                       "train");
        read(s, "h_max", c.train.h_max, "train");
        read(s, "alpha_min", c.train.alpha_min, "train");
        read(s, "r_p", c.train.r_p, "train");
        read(s, "learning_rate", c.train.learning_rate, "train");
        read(s, "triplet_batch_size", c.train.triplet_batch_size, "train");
        read(s, "steps_per_level", c.train.steps_per_level, "train");
        read(s, "seed", c.train.seed, "train");
        read(s, "adaptive_h_max", c.train.adaptive_h_max, "train");
        read(s, "retry_budget", c.train.retry_budget, "train");
        std::string mode = pool_mode_name(c.train.pool_mode);
        read(s, "pool_mode", mode, "train");
        if (mode == "descendant") c.train.pool_mode = PoolMode::descendant;
        else if (mode == "owned_only") c.train.pool_mode = PoolMode::owned_only;
        else throw ConfigError("train.pool_mode must be descendant or owned_only");
    }
    if (j.contains("probe")) {
        const auto& s = j.at("probe");
        reject_unknown(s, {"batch_size", "epochs", "learning_rate", "seed", "map_star"}, "probe");
        read(s, "batch_size", c.probe.batch_size, "probe");
        read(s, "epochs", c.probe.epochs, "probe");
        read(s, "learning_rate", c.probe.learning_rate, "probe");
        read(s, "seed", c.probe.seed, "probe");
        std::string mode = map_star_name(c.probe.map_star);
        read(s, "map_star", mode, "probe");
        if (mode == "pooled") c.probe.map_star = MapStarMode::pooled;
        else if (mode == "class_weighted") c.probe.map_star = MapStarMode::class_weighted;
        else throw ConfigError("probe.map_star must be pooled or class_weighted");
    }
    if (j.contains("viz")) {
        const auto& s = j.at("viz");
        reject_unknown(s, {"pca_dim", "skip_pca", "perplexity", "iterations", "early_exaggeration",
                           "exaggeration_iters", "learning_rate", "momentum_switch_iter", "seed"},
                       "viz");
        read(s, "pca_dim", c.viz.pca_dim, "viz");
        read(s, "skip_pca", c.viz.skip_pca, "viz");
        read(s, "perplexity", c.viz.tsne.perplexity, "viz");
        read(s, "iterations", c.viz.tsne.iterations, "viz");
        read(s, "early_exaggeration", c.viz.tsne.early_exaggeration, "viz");
        read(s, "exaggeration_iters", c.viz.tsne.exaggeration_iters, "viz");
        read(s, "learning_rate", c.viz.tsne.learning_rate, "viz");
        read(s, "momentum_switch_iter", c.viz.tsne.momentum_switch_iter, "viz");
        read(s, "seed", c.viz.tsne.seed, "viz");
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("override must look like section.key=value: " + assignment);
    const std::string section = assignment.substr(0, dot);
    const std::string key = assignment.substr(dot + 1, eq - dot - 1);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    doc[section][key] = value;
}

std::string config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Encoder make_encoder(const ExperimentConfig& cfg, std::size_t d_in) {
    return Encoder(cfg.encoder.dims(d_in), cfg.encoder.seed, cfg.encoder.normalize_embeddings);
}

}  // namespace hcl
