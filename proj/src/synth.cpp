#include "hcl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "hcl/error.hpp"
#include "hcl/rng.hpp"

namespace hcl {

using nlohmann::json;

void SynthSpec::validate() const {
    if (depth < 1) throw ConfigError("synth: depth must be >= 1");
    if (static_cast<int>(branching.size()) != depth)
        throw ConfigError("synth: branching needs one entry per level");
    for (int b : branching)
        if (b < 1) throw ConfigError("synth: branching factors must be >= 1");
    if (static_cast<int>(level_scales.size()) != depth)
        throw ConfigError("synth: level_scales needs one entry per level");
    for (std::size_t i = 0; i < level_scales.size(); ++i) {
        if (!(level_scales[i] > 0.0)) throw ConfigError("synth: level_scales must be positive");
        if (i > 0 && !(level_scales[i] < level_scales[i - 1]))
            throw ConfigError("synth: level_scales must be strictly decreasing");
    }
    if (images_per_leaf < 2) throw ConfigError("synth: images_per_leaf must be >= 2");
    if (d_in < 1) throw ConfigError("synth: d_in must be >= 1");
    if (signal_dim > d_in) throw ConfigError("synth: signal_dim exceeds d_in");
    if (noise_scale < 0.0 || nuisance_scale < 0.0 || instance_scale < 0.0)
        throw ConfigError("synth: scales must be non-negative");
    if (share_probability < 0.0 || share_probability > 1.0)
        throw ConfigError("synth: share_probability must be in [0,1]");
    if (instances < 1) throw ConfigError("synth: instances must be >= 1");
    if (internal_images_per_node < 0 || image_count_skew < 0.0)
        throw ConfigError("synth: counts must be non-negative");
    if (probe_train_fraction < 0.0 || probe_val_fraction < 0.0 ||
        probe_train_fraction + probe_val_fraction >= 1.0)
        throw ConfigError("synth: probe fractions must be >= 0 and sum to < 1");
}

json to_json(const SynthSpec& s) {
    return {{"depth", s.depth},
            {"branching", s.branching},
            {"images_per_leaf", s.images_per_leaf},
            {"d_in", s.d_in},
            {"level_scales", s.level_scales},
            {"seed", s.seed},
            {"noise_scale", s.noise_scale},
            {"signal_dim", s.signal_dim},
            {"nuisance_scale", s.nuisance_scale},
            {"internal_images_per_node", s.internal_images_per_node},
            {"share_probability", s.share_probability},
            {"image_count_skew", s.image_count_skew},
            {"instances", s.instances},
            {"instance_scale", s.instance_scale},
            {"probe_train_fraction", s.probe_train_fraction},
            {"probe_val_fraction", s.probe_val_fraction}};
}

SynthSpec synth_spec_from_json(const json& j) {
    SynthSpec s;
    if (j.contains("preset")) s = synth_preset(j.at("preset").get<std::string>());
    try {
        s.depth = j.value("depth", s.depth);
        s.branching = j.value("branching", s.branching);
        s.images_per_leaf = j.value("images_per_leaf", s.images_per_leaf);
        s.d_in = j.value("d_in", s.d_in);
        s.level_scales = j.value("level_scales", s.level_scales);
        s.seed = j.value("seed", s.seed);
        s.noise_scale = j.value("noise_scale", s.noise_scale);
        s.signal_dim = j.value("signal_dim", s.signal_dim);
        s.nuisance_scale = j.value("nuisance_scale", s.nuisance_scale);
        s.internal_images_per_node = j.value("internal_images_per_node", s.internal_images_per_node);
        s.share_probability = j.value("share_probability", s.share_probability);
        s.image_count_skew = j.value("image_count_skew", s.image_count_skew);
        s.instances = j.value("instances", s.instances);
        s.instance_scale = j.value("instance_scale", s.instance_scale);
        s.probe_train_fraction = j.value("probe_train_fraction", s.probe_train_fraction);
        s.probe_val_fraction = j.value("probe_val_fraction", s.probe_val_fraction);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

namespace {

struct Concept {
    NodeId id;
    std::optional<NodeId> parent;
    int level = 0;
    std::vector<double> center;
    bool leaf = false;
};

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

std::string pad(int value, int width) {
    std::string s = std::to_string(value);
    if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
    return s;
}

}  // namespace

Dataset generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t sig = spec.signal_dim == 0 ? spec.d_in : spec.signal_dim;
    Rng rng(splitmix64(spec.seed));

    auto random_direction = [&](double length) {
        std::vector<double> v(sig);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : v) {
                x = standard_normal(rng);
                norm += x * x;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& x : v) x *= length / norm;
        return v;
    };

    // Concept hierarchy shared by every instance, built breadth-first.
    std::vector<Concept> concepts{{"root", std::nullopt, 0, std::vector<double>(sig, 0.0), false}};
    std::vector<std::size_t> frontier{0};
    for (int level = 1; level <= spec.depth; ++level) {
        std::vector<std::size_t> next;
        const int width = spec.branching[static_cast<std::size_t>(level - 1)] > 10 ? 2 : 1;
        for (std::size_t parent : frontier) {
            for (int b = 0; b < spec.branching[static_cast<std::size_t>(level - 1)]; ++b) {
                Concept c;
                const auto& p = concepts[parent];
                c.id = (level == 1 ? "c" : p.id + ".") + pad(b, width);
                c.parent = p.id;
                c.level = level;
                const auto step = random_direction(spec.level_scales[static_cast<std::size_t>(level - 1)]);
                c.center = p.center;
                for (std::size_t k = 0; k < sig; ++k) c.center[k] += step[k];
                c.leaf = level == spec.depth;
                concepts.push_back(std::move(c));
                next.push_back(concepts.size() - 1);
            }
        }
        frontier = std::move(next);
    }

    std::vector<std::size_t> leaves;
    for (std::size_t i = 0; i < concepts.size(); ++i)
        if (concepts[i].leaf) leaves.push_back(i);

    Dataset data;
    data.dim = spec.d_in;
    for (std::size_t l : leaves) data.class_names.push_back(concepts[l].id);

    std::map<NodeId, std::vector<ImageId>> owned;
    auto make_image = [&](const std::vector<double>& center) {
        std::vector<double> f(spec.d_in);
        for (std::size_t k = 0; k < spec.d_in; ++k) {
            const double base = k < sig ? center[k] : 0.0;
            const double scale = k < sig ? spec.noise_scale : spec.nuisance_scale;
            f[k] = round_to_float(base + scale * standard_normal(rng));
        }
        return f;
    };

    for (int inst = 0; inst < spec.instances; ++inst) {
        const std::string inst_tag = spec.instances > 1 ? "k" + pad(inst, 2) + "/" : "";
        std::map<NodeId, std::vector<double>> centers;
        for (const auto& c : concepts) {
            auto center = c.center;
            if (spec.instance_scale > 0.0 && c.level > 0)
                for (std::size_t k = 0; k < sig; ++k)
                    center[k] += spec.instance_scale * standard_normal(rng) /
                                 std::sqrt(static_cast<double>(sig));
            centers[c.id] = std::move(center);
        }

        for (const auto& c : concepts) {
            if (c.leaf || c.level == 0) continue;
            for (int i = 0; i < spec.internal_images_per_node; ++i) {
                ImageRecord rec{c.id + "/" + inst_tag + pad(i, 4), make_image(centers[c.id]),
                                std::nullopt, Split::pretrain};
                owned[c.id].push_back(rec.id);
                data.records.push_back(std::move(rec));
            }
        }

        for (std::size_t li = 0; li < leaves.size(); ++li) {
            const auto& c = concepts[leaves[li]];
            const double frac =
                leaves.size() > 1 ? static_cast<double>(li) / static_cast<double>(leaves.size() - 1) : 0.0;
            const int count = std::max(
                2, static_cast<int>(std::lround(spec.images_per_leaf * std::exp(-spec.image_count_skew * frac))));
            std::vector<std::size_t> made;
            for (int i = 0; i < count; ++i) {
                ImageRecord rec{c.id + "/" + inst_tag + pad(i, 4), make_image(centers[c.id]),
                                static_cast<int>(li), Split::pretrain};
                owned[c.id].push_back(rec.id);
                if (spec.share_probability > 0.0 && uniform01(rng) < spec.share_probability)
                    owned[*c.parent].push_back(rec.id);
                made.push_back(data.records.size());
                data.records.push_back(std::move(rec));
            }
            // Carve probe splits per leaf so every class appears in each split.
            std::vector<std::size_t> order = made;
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(rng, i)]);
            const auto n_val = static_cast<std::size_t>(std::lround(spec.probe_val_fraction * count));
            const auto n_train = static_cast<std::size_t>(std::lround(spec.probe_train_fraction * count));
            for (std::size_t i = 0; i < order.size(); ++i) {
                auto& rec = data.records[order[i]];
                if (i < n_val) rec.split = Split::probe_val;
                else if (i < n_val + n_train) rec.split = Split::probe_train;
            }
        }
    }

    std::vector<NodeSpec> specs;
    for (const auto& c : concepts) {
        auto images = owned[c.id];
        std::sort(images.begin(), images.end());
        specs.push_back({c.id, c.id, c.parent, std::move(images)});
    }
    data.tree = ConceptTree::build(std::move(specs));
    data.reindex();
    return data;
}

SynthSpec synth_preset(std::string_view name) {
    SynthSpec s;
    // Shared base: two-level hierarchy whose structure sits in a low-dimensional
    // subspace buried under stronger nuisance noise.
    s.depth = 2;
    s.branching = {3, 3};
    s.d_in = 64;
    s.signal_dim = 8;
    s.level_scales = {6.0, 2.5};
    s.noise_scale = 1.0;
    s.nuisance_scale = 3.0;
    s.images_per_leaf = 100;
    s.internal_images_per_node = 5;
    s.seed = 7;
    if (name == "depth2") return s;
    // Dataset-size presets: 1, 7 or 20 instances of the same concept hierarchy,
    // each with the same per-instance image budget.
    if (name == "small" || name == "medium" || name == "large") {
        s.instances = name == "small" ? 1 : (name == "medium" ? 7 : 20);
        s.images_per_leaf = 30;
        s.internal_images_per_node = 2;
        s.instance_scale = 1.5;
        return s;
    }
    // Strong level-1 separation with finer levels underneath; without replay
    // the deeper margins erode the level-1 structure.
    if (name == "forgetting") {
        s.depth = 3;
        s.branching = {3, 2, 2};
        s.level_scales = {8.0, 3.0, 1.5};
        s.noise_scale = 0.6;
        s.images_per_leaf = 120;
        s.internal_images_per_node = 3;
        return s;
    }
    throw ConfigError("unknown synth preset '" + std::string(name) + "'");
}

std::vector<std::string> synth_preset_names() {
    return {"small", "medium", "large", "depth2", "forgetting"};
}

}  // namespace hcl
