#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hcl/matrix.hpp"

namespace hcl {

using NodeId = std::string;
using ImageId = std::string;

enum class Split { pretrain, probe_train, probe_val };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ConceptNode {
    NodeId id;
    std::string name;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;     // sorted by id
    std::vector<ImageId> owned_images;  // images filed directly under this node
    int level = 0;                    // root is 0, its children 1, ...

    bool operator==(const ConceptNode&) const = default;
};

// Raw node description as it appears in a manifest.
struct NodeSpec {
    NodeId id;
    std::string name;
    std::optional<NodeId> parent;
    std::vector<ImageId> images;
};

// Immutable, validated concept hierarchy. Nodes are kept in lexicographic
// id order so every traversal is reproducible.
class ConceptTree {
public:
    // Validates and indexes. Throws DataError on duplicate ids, dangling
    // parents, cycles, zero or multiple roots, or an image listed twice
    // under one node.
    static ConceptTree build(std::vector<NodeSpec> specs);

    const NodeId& root() const noexcept { return root_; }
    const ConceptNode& node(const NodeId& id) const;
    bool contains(const NodeId& id) const { return nodes_.count(id) != 0; }
    const std::map<NodeId, ConceptNode>& nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Nodes with level == h, sorted by id. Empty when the tree is shallower.
    std::vector<NodeId> nodes_at_level(int h) const;
    // Deepest level present.
    int depth() const noexcept { return depth_; }
    // Other children of this node's parent, sorted by id.
    std::vector<NodeId> siblings(const NodeId& id) const;
    // The ancestor-or-self at level 1. Requires level(id) >= 1.
    const NodeId& level1_ancestor(const NodeId& id) const;
    // Deepest level found in the subtree rooted at `id`.
    int subtree_depth(const NodeId& id) const;

    bool operator==(const ConceptTree&) const = default;

private:
    std::map<NodeId, ConceptNode> nodes_;
    NodeId root_;
    int depth_ = 0;
};

// Sorted, deduplicated image ids of a node and all its descendants.
using ImagePool = std::vector<ImageId>;
using PoolMap = std::map<NodeId, ImagePool>;

// pool(n) = owned(n) U pool(children); one bottom-up pass.
PoolMap build_pools(const ConceptTree& tree);
// pool(n) = owned(n) only. Exists to reproduce the collapse failure mode.
PoolMap owned_only_pools(const ConceptTree& tree);

struct ImageRecord {
    ImageId id;
    std::vector<double> features;
    std::optional<int> label;
    Split split = Split::pretrain;
};

// A loaded tree together with the feature rows of every image.
struct Dataset {
    ConceptTree tree;
    std::vector<ImageRecord> records;
    std::vector<std::string> class_names;
    std::size_t dim = 0;

    void reindex();
    std::optional<std::size_t> find(const ImageId& id) const;
    std::size_t index_of(const ImageId& id) const;  // throws DataError
    Matrix feature_matrix() const;

private:
    std::unordered_map<ImageId, std::size_t> index_;
};

// Removes probe_val images from every pool.
PoolMap pretraining_pools(const PoolMap& pools, const Dataset& data);
// Throws DataError naming the first probe_val image found in any pool.
void check_split_hygiene(const PoolMap& pools, const Dataset& data);

// The level-1 concept each image falls under (first owning node in id order).
// Images owned only by the root map to an empty string.
std::vector<std::string> level1_concepts(const Dataset& data);

enum class FeatureFormat { binary, csv };

struct ManifestWriteOptions {
    FeatureFormat format = FeatureFormat::binary;
    std::string features_file = "features.bin";
};

Dataset load_manifest(const std::filesystem::path& path);
void write_manifest(const Dataset& data, const std::filesystem::path& path,
                    const ManifestWriteOptions& options = {});

}  // namespace hcl
