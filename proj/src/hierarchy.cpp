#include "hcl/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "hcl/error.hpp"
#include "hcl/feature_io.hpp"

namespace hcl {

using nlohmann::json;

std::string_view to_string(Split split) {
    switch (split) {
        case Split::pretrain: return "pretrain";
        case Split::probe_train: return "probe_train";
        case Split::probe_val: return "probe_val";
    }
    return "pretrain";
}

Split parse_split(std::string_view text) {
    if (text == "pretrain") return Split::pretrain;
    if (text == "probe_train") return Split::probe_train;
    if (text == "probe_val") return Split::probe_val;
    throw DataError("unknown split '" + std::string(text) + "'");
}

ConceptTree ConceptTree::build(std::vector<NodeSpec> specs) {
    ConceptTree tree;
    for (auto& spec : specs) {
        std::set<ImageId> seen;
        for (const auto& img : spec.images)
            if (!seen.insert(img).second)
                throw DataError("image " + img + " listed twice under node " + spec.id);
        ConceptNode node{spec.id, spec.name, spec.parent, {}, std::move(spec.images), 0};
        if (!tree.nodes_.emplace(spec.id, std::move(node)).second)
            throw DataError("duplicate node id " + spec.id);
    }
    if (tree.nodes_.empty()) throw DataError("manifest has no nodes");

    for (const auto& [id, node] : tree.nodes_) {
        if (node.parent && !tree.nodes_.count(*node.parent))
            throw DataError("node " + id + " has dangling parent " + *node.parent);
        if (node.parent && *node.parent == id) throw DataError("cycle detected at node " + id);
    }
    // Walk parent chains; a chain longer than the node count revisits a node.
    for (const auto& [id, node] : tree.nodes_) {
        std::set<NodeId> seen{id};
        const ConceptNode* cur = &node;
        while (cur->parent) {
            if (!seen.insert(*cur->parent).second)
                throw DataError("cycle detected at node " + *cur->parent);
            cur = &tree.nodes_.at(*cur->parent);
        }
    }
    std::vector<NodeId> roots;
    for (const auto& [id, node] : tree.nodes_)
        if (!node.parent) roots.push_back(id);
    if (roots.size() != 1) {
        std::string list;
        for (const auto& r : roots) list += (list.empty() ? "" : ", ") + r;
        throw DataError("expected exactly one root, found " + std::to_string(roots.size()) +
                        (list.empty() ? "" : " (" + list + ")"));
    }
    tree.root_ = roots.front();

    for (auto& [id, node] : tree.nodes_)
        if (node.parent) tree.nodes_.at(*node.parent).children.push_back(id);
    // Children were appended in map (id) order, so they are already sorted.

    std::vector<NodeId> frontier{tree.root_};
    int level = 0;
    while (!frontier.empty()) {
        std::vector<NodeId> next;
        for (const auto& id : frontier) {
            auto& node = tree.nodes_.at(id);
            node.level = level;
            next.insert(next.end(), node.children.begin(), node.children.end());
        }
        if (!next.empty()) ++level;
        frontier = std::move(next);
    }
    tree.depth_ = level;
    return tree;
}

const ConceptNode& ConceptTree::node(const NodeId& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw DataError("unknown node " + id);
    return it->second;
}

std::vector<NodeId> ConceptTree::nodes_at_level(int h) const {
    std::vector<NodeId> out;
    for (const auto& [id, node] : nodes_)
        if (node.level == h) out.push_back(id);
    return out;
}

std::vector<NodeId> ConceptTree::siblings(const NodeId& id) const {
    const auto& n = node(id);
    std::vector<NodeId> out;
    if (!n.parent) return out;
    for (const auto& c : node(*n.parent).children)
        if (c != id) out.push_back(c);
    return out;
}

const NodeId& ConceptTree::level1_ancestor(const NodeId& id) const {
    const ConceptNode* cur = &node(id);
    if (cur->level < 1) throw DataError("root has no level-1 ancestor");
    while (cur->level > 1) cur = &nodes_.at(*cur->parent);
    return cur->id;
}

int ConceptTree::subtree_depth(const NodeId& id) const {
    const auto& n = node(id);
    int deepest = n.level;
    for (const auto& c : n.children) deepest = std::max(deepest, subtree_depth(c));
    return deepest;
}

PoolMap build_pools(const ConceptTree& tree) {
    std::vector<const ConceptNode*> order;
    for (const auto& [id, node] : tree.nodes()) order.push_back(&node);
    std::stable_sort(order.begin(), order.end(),
                     [](const ConceptNode* a, const ConceptNode* b) { return a->level > b->level; });
    PoolMap pools;
    for (const ConceptNode* node : order) {
        ImagePool pool(node->owned_images.begin(), node->owned_images.end());
        for (const auto& c : node->children) {
            const auto& child = pools.at(c);
            pool.insert(pool.end(), child.begin(), child.end());
        }
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
        pools.emplace(node->id, std::move(pool));
    }
    return pools;
}

PoolMap owned_only_pools(const ConceptTree& tree) {
    PoolMap pools;
    for (const auto& [id, node] : tree.nodes()) {
        ImagePool pool(node.owned_images.begin(), node.owned_images.end());
        std::sort(pool.begin(), pool.end());
        pools.emplace(id, std::move(pool));
    }
    return pools;
}

void Dataset::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < records.size(); ++i)
        if (!index_.emplace(records[i].id, i).second)
            throw DataError("duplicate image id " + records[i].id + " in feature rows");
}

std::optional<std::size_t> Dataset::find(const ImageId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t Dataset::index_of(const ImageId& id) const {
    auto found = find(id);
    if (!found) throw DataError("no features for image " + id);
    return *found;
}

Matrix Dataset::feature_matrix() const {
    Matrix x(records.size(), dim);
    for (std::size_t i = 0; i < records.size(); ++i)
        std::copy(records[i].features.begin(), records[i].features.end(), x.row(i).begin());
    return x;
}

PoolMap pretraining_pools(const PoolMap& pools, const Dataset& data) {
    PoolMap out;
    for (const auto& [id, pool] : pools) {
        ImagePool kept;
        for (const auto& img : pool) {
            auto idx = data.find(img);
            if (idx && data.records[*idx].split == Split::probe_val) continue;
            kept.push_back(img);
        }
        out.emplace(id, std::move(kept));
    }
    return out;
}

void check_split_hygiene(const PoolMap& pools, const Dataset& data) {
    for (const auto& [id, pool] : pools)
        for (const auto& img : pool) {
            auto idx = data.find(img);
            if (idx && data.records[*idx].split == Split::probe_val)
                throw DataError("probe_val image " + img + " leaked into pretraining pool of node " +
                                id);
        }
}

std::vector<std::string> level1_concepts(const Dataset& data) {
    std::vector<std::string> out(data.records.size());
    std::vector<bool> assigned(data.records.size(), false);
    for (const auto& [id, node] : data.tree.nodes()) {
        if (node.level < 1) continue;
        const auto& top = data.tree.level1_ancestor(id);
        for (const auto& img : node.owned_images) {
            auto idx = data.find(img);
            if (!idx || assigned[*idx]) continue;
            out[*idx] = top;
            assigned[*idx] = true;
        }
    }
    return out;
}

namespace {

std::vector<std::string> node_images(const json& node) {
    std::vector<std::string> images;
    if (node.contains("images"))
        for (const auto& img : node.at("images")) images.push_back(img.get<std::string>());
    return images;
}

std::string label_name(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw DataError("label values must be strings or integers");
}

}  // namespace

Dataset load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }

    Dataset data;
    try {
        std::vector<NodeSpec> specs;
        for (const auto& n : doc.at("nodes")) {
            NodeSpec spec;
            spec.id = n.at("id").get<std::string>();
            spec.name = n.value("name", spec.id);
            if (n.contains("parent") && !n.at("parent").is_null())
                spec.parent = n.at("parent").get<std::string>();
            spec.images = node_images(n);
            specs.push_back(std::move(spec));
        }
        data.tree = ConceptTree::build(std::move(specs));

        const auto& feat = doc.at("features");
        const auto feat_path = path.parent_path() / feat.at("path").get<std::string>();
        const std::string format = feat.value("format", "binary");
        const std::size_t dim = feat.at("dim").get<std::size_t>();
        FeatureTable table;
        if (format == "csv") {
            table = read_feature_csv(feat_path);
        } else if (format == "binary") {
            table.values = read_feature_binary(feat_path);
            for (const auto& id : feat.at("ids")) table.ids.push_back(id.get<std::string>());
            if (table.ids.size() != table.values.rows())
                throw DataError("feature file " + feat_path.string() + " has " +
                                std::to_string(table.values.rows()) + " rows but manifest lists " +
                                std::to_string(table.ids.size()) + " ids");
        } else {
            throw DataError("unknown feature format '" + format + "'");
        }
        if (!table.ids.empty() && table.values.cols() != dim)
            throw DataError("dimension mismatch: manifest says " + std::to_string(dim) +
                            ", feature file " + feat_path.string() + " has " +
                            std::to_string(table.values.cols()) + " (first image " +
                            table.ids.front() + ")");
        data.dim = dim;
        for (std::size_t r = 0; r < table.ids.size(); ++r) {
            auto row = table.values.row(r);
            data.records.push_back({table.ids[r], {row.begin(), row.end()}, std::nullopt,
                                    Split::pretrain});
        }
        data.reindex();

        for (const auto& [id, node] : data.tree.nodes())
            for (const auto& img : node.owned_images)
                if (!data.find(img))
                    throw DataError("missing features for image " + img + " (node " + id + ")");

        if (doc.contains("labels")) {
            const auto& labels = doc.at("labels");
            if (doc.contains("classes")) {
                for (const auto& c : doc.at("classes")) data.class_names.push_back(label_name(c));
            } else {
                std::set<std::string> names;
                for (const auto& [img, cls] : labels.items()) names.insert(label_name(cls));
                data.class_names.assign(names.begin(), names.end());
            }
            const bool by_index = doc.contains("classes");
            for (const auto& [img, cls] : labels.items()) {
                auto idx = data.find(img);
                if (!idx) throw DataError("label given for unknown image " + img);
                // with an explicit class list, integers index into it
                if (by_index && cls.is_number_integer()) {
                    const auto k = cls.get<long long>();
                    if (k < 0 || k >= static_cast<long long>(data.class_names.size()))
                        throw DataError("image " + img + " has class index " + std::to_string(k) + " out of range");
                    data.records[*idx].label = static_cast<int>(k);
                    continue;
                }
                const auto name = label_name(cls);
                auto it = std::find(data.class_names.begin(), data.class_names.end(), name);
                if (it == data.class_names.end())
                    throw DataError("image " + img + " has label '" + name + "' not in classes");
                data.records[*idx].label = static_cast<int>(it - data.class_names.begin());
            }
        }
        if (doc.contains("splits")) {
            for (const auto& [img, split] : doc.at("splits").items()) {
                auto idx = data.find(img);
                if (!idx) throw DataError("split given for unknown image " + img);
                data.records[*idx].split = parse_split(split.get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
    return data;
}

void write_manifest(const Dataset& data, const std::filesystem::path& path,
                    const ManifestWriteOptions& options) {
    json doc;
    json nodes = json::array();
    for (const auto& [id, node] : data.tree.nodes()) {
        json n{{"id", id}, {"name", node.name}, {"images", node.owned_images}};
        n["parent"] = node.parent ? json(*node.parent) : json(nullptr);
        nodes.push_back(std::move(n));
    }
    doc["nodes"] = std::move(nodes);

    const auto feat_path = path.parent_path() / options.features_file;
    json ids = json::array();
    for (const auto& r : data.records) ids.push_back(r.id);
    if (options.format == FeatureFormat::binary) {
        write_feature_binary(feat_path, data.feature_matrix());
        doc["features"] = {{"path", options.features_file}, {"dim", data.dim},
                           {"format", "binary"}, {"ids", std::move(ids)}};
    } else {
        write_feature_csv(feat_path, {[&] {
                              std::vector<std::string> v;
                              for (const auto& r : data.records) v.push_back(r.id);
                              return v;
                          }(),
                                      data.feature_matrix()});
        doc["features"] = {{"path", options.features_file}, {"dim", data.dim}, {"format", "csv"}};
    }

    json labels = json::object();
    json splits = json::object();
    for (const auto& r : data.records) {
        if (r.label) labels[r.id] = data.class_names.at(static_cast<std::size_t>(*r.label));
        splits[r.id] = std::string(to_string(r.split));
    }
    if (!data.class_names.empty()) {
        doc["classes"] = data.class_names;
        doc["labels"] = std::move(labels);
    }
    doc["splits"] = std::move(splits);

    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << doc.dump(1) << '\n';
}

}  // namespace hcl
