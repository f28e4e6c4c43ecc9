#include <doctest.h>

#include <fstream>
#include <set>

#include <json.hpp>

#include "helpers.hpp"
#include "hcl/error.hpp"
#include "hcl/feature_io.hpp"
#include "hcl/hierarchy.hpp"
#include "hcl/synth.hpp"

using namespace hcl;
using nlohmann::json;

namespace {

NodeSpec spec(std::string id, std::optional<std::string> parent, std::vector<std::string> images = {}) {
    return {id, id, std::move(parent), std::move(images)};
}

// root -> {Interior, Exterior, Views}, Interior -> {Organ, Nave}, Exterior -> {Facade, Tower}
std::vector<NodeSpec> cathedral_specs() {
    return {spec("root", std::nullopt),
            spec("Interior", "root", {"i0"}),
            spec("Exterior", "root"),
            spec("Views", "root", {"v0", "v1"}),
            spec("Organ", "Interior", {"o0", "o1"}),
            spec("Nave", "Interior", {"n0", "n1", "o0"}),
            spec("Facade", "Exterior", {"f0", "f1"}),
            spec("Tower", "Exterior", {"t0"})};
}

// Writes a manifest with CSV features (one random row per image).
std::filesystem::path write_csv_manifest(const std::filesystem::path& dir, const json& nodes, std::size_t dim,
                                         const std::vector<std::string>& ids, json extra = json::object()) {
    FeatureTable t;
    t.ids = ids;
    t.values = test::random_matrix(ids.size(), dim, 77);
    write_feature_csv(dir / "features.csv", t);
    json doc = {{"nodes", nodes}, {"features", {{"path", "features.csv"}, {"dim", dim}, {"format", "csv"}}}};
    for (auto& [k, v] : extra.items()) doc[k] = v;
    std::ofstream(dir / "manifest.json") << doc.dump(1);
    return dir / "manifest.json";
}

json three_node_json() {
    return json::array({{{"id", "root"}, {"name", "root"}, {"parent", nullptr}, {"images", json::array()}},
                        {{"id", "A"}, {"name", "A"}, {"parent", "root"}, {"images", {"a1", "a2"}}},
                        {{"id", "B"}, {"name", "B"}, {"parent", "root"}, {"images", {"b1"}}}});
}

}  // namespace

TEST_SUITE("hierarchy") {

TEST_CASE("three-node manifest gets levels 0 and 1") {
    const auto dir = test::scratch_dir("hier_three");
    const Dataset d = load_manifest(write_csv_manifest(dir, three_node_json(), 4, {"a1", "a2", "b1"}));
    CHECK(d.tree.node("root").level == 0);
    CHECK(d.tree.node("A").level == 1);
    CHECK(d.tree.node("B").level == 1);
    CHECK(d.tree.root() == "root");
    CHECK(d.dim == 4);
    CHECK(d.records.size() == 3);
}

TEST_CASE("structural errors name the offending node") {
    SUBCASE("two-node cycle") {
        std::vector<NodeSpec> s{spec("root", std::nullopt), spec("A", "B"), spec("B", "A")};
        CHECK_THROWS_WITH_AS(ConceptTree::build(s), doctest::Contains("cycle"), DataError);
    }
    SUBCASE("self parent") {
        std::vector<NodeSpec> s{spec("root", std::nullopt), spec("A", "A")};
        CHECK_THROWS_WITH_AS(ConceptTree::build(s), doctest::Contains("cycle detected at node A"), DataError);
    }
    SUBCASE("multiple roots") {
        std::vector<NodeSpec> s{spec("r1", std::nullopt), spec("r2", std::nullopt)};
        CHECK_THROWS_WITH_AS(ConceptTree::build(s), doctest::Contains("exactly one root"), DataError);
    }
    SUBCASE("dangling parent") {
        std::vector<NodeSpec> s{spec("root", std::nullopt), spec("A", "ghost")};
        CHECK_THROWS_WITH_AS(ConceptTree::build(s), doctest::Contains("ghost"), DataError);
    }
    SUBCASE("duplicate node id") {
        std::vector<NodeSpec> s{spec("root", std::nullopt), spec("A", "root"), spec("A", "root")};
        CHECK_THROWS_WITH_AS(ConceptTree::build(s), doctest::Contains("duplicate node id A"), DataError);
    }
    SUBCASE("image listed twice under one node") {
        std::vector<NodeSpec> s{spec("root", std::nullopt), spec("A", "root", {"x", "x"})};
        CHECK_THROWS_WITH_AS(ConceptTree::build(s), doctest::Contains("node A"), DataError);
    }
    SUBCASE("empty") { CHECK_THROWS_AS(ConceptTree::build({}), DataError); }
}

TEST_CASE("the same image may live under several nodes") {
    std::vector<NodeSpec> s{spec("root", std::nullopt), spec("A", "root", {"x"}), spec("B", "root", {"x"})};
    CHECK_NOTHROW(ConceptTree::build(s));
}

TEST_CASE("cathedral-shaped tree populates levels 1 and 2") {
    const auto tree = ConceptTree::build(cathedral_specs());
    CHECK(tree.nodes_at_level(1) == std::vector<NodeId>{"Exterior", "Interior", "Views"});
    CHECK(tree.nodes_at_level(2) == std::vector<NodeId>{"Facade", "Nave", "Organ", "Tower"});
    CHECK(tree.nodes_at_level(3).empty());
    CHECK(tree.depth() == 2);
    CHECK(tree.siblings("Interior") == std::vector<NodeId>{"Exterior", "Views"});
    CHECK(tree.level1_ancestor("Organ") == "Interior");
    CHECK(tree.subtree_depth("Views") == 1);
    CHECK(tree.subtree_depth("Exterior") == 2);
    CHECK(tree.node("Interior").children == std::vector<NodeId>{"Nave", "Organ"});
}

TEST_CASE("pools follow descendant pooling with dedup") {
    const auto tree = ConceptTree::build(cathedral_specs());
    const auto pools = build_pools(tree);
    CHECK(pools.at("Organ") == ImagePool{"o0", "o1"});
    CHECK(pools.at("Interior") == ImagePool{"i0", "n0", "n1", "o0", "o1"});  // o0 counted once
    CHECK(pools.at("Exterior") == ImagePool{"f0", "f1", "t0"});
    CHECK(pools.at("root").size() == 10);

    const auto own = owned_only_pools(tree);
    CHECK(own.at("Interior") == ImagePool{"i0"});
    CHECK(own.at("Exterior").empty());
}

TEST_CASE("pool examples: leaf, disjoint union, overlap") {
    {
        const auto t = ConceptTree::build({spec("root", std::nullopt), spec("L", "root", {"i1", "i2", "i3"})});
        CHECK(build_pools(t).at("L") == ImagePool{"i1", "i2", "i3"});
    }
    {
        const auto t = ConceptTree::build({spec("root", std::nullopt), spec("P", "root", {"p1", "p2"}),
                                           spec("C1", "P", {"i1", "i2", "i3"}),
                                           spec("C2", "P", {"j1", "j2", "j3", "j4"})});
        CHECK(build_pools(t).at("P").size() == 9);
    }
    {
        const auto t = ConceptTree::build({spec("root", std::nullopt), spec("P", "root", {"p1"}),
                                           spec("C", "P", {"p1", "i1"})});
        CHECK(build_pools(t).at("P") == ImagePool{"i1", "p1"});
    }
}

TEST_CASE("property: pool recursion and level partition on random trees") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto specs = test::random_tree_specs(rng, 4, 3, 5, 40);
        const auto tree = ConceptTree::build(specs);
        const auto pools = build_pools(tree);
        for (const auto& [id, node] : tree.nodes()) {
            std::set<ImageId> expect(node.owned_images.begin(), node.owned_images.end());
            std::size_t bound = node.owned_images.size();
            for (const auto& c : node.children) {
                expect.insert(pools.at(c).begin(), pools.at(c).end());
                bound += pools.at(c).size();
                CHECK(tree.node(c).level == node.level + 1);
            }
            const ImagePool want(expect.begin(), expect.end());
            REQUIRE(pools.at(id) == want);
            CHECK(pools.at(id).size() <= bound);
        }
        std::multiset<NodeId> seen;
        for (int h = 1; h <= tree.depth() + 1; ++h)
            for (const auto& id : tree.nodes_at_level(h)) seen.insert(id);
        CHECK(seen.size() == tree.size() - 1);
        for (const auto& [id, node] : tree.nodes())
            if (id != tree.root()) CHECK(seen.count(id) == 1);
    }
}

TEST_CASE("loading twice gives identical trees and pools") {
    const auto dir = test::scratch_dir("hier_twice");
    const Dataset data = generate(synth_preset("small"));
    write_manifest(data, dir / "m.json");
    const Dataset a = load_manifest(dir / "m.json");
    const Dataset b = load_manifest(dir / "m.json");
    CHECK(a.tree == b.tree);
    CHECK(build_pools(a.tree) == build_pools(b.tree));
    CHECK(a.feature_matrix() == b.feature_matrix());
}

TEST_CASE("manifest round trip in binary and CSV formats") {
    const auto dir = test::scratch_dir("hier_roundtrip");
    const Dataset data = generate(synth_preset("small"));
    for (auto fmt : {FeatureFormat::binary, FeatureFormat::csv}) {
        ManifestWriteOptions o;
        o.format = fmt;
        o.features_file = fmt == FeatureFormat::binary ? "f.bin" : "f.csv";
        write_manifest(data, dir / "m.json", o);
        const Dataset back = load_manifest(dir / "m.json");
        CHECK(back.tree == data.tree);
        CHECK(back.class_names == data.class_names);
        REQUIRE(back.records.size() == data.records.size());
        for (const auto& rec : data.records) {
            const auto& r = back.records[back.index_of(rec.id)];
            CHECK(r.features == rec.features);  // synth rounds to float, so f32 storage is exact
            CHECK(r.label == rec.label);
            CHECK(r.split == rec.split);
        }
    }
}

TEST_CASE("manifest loading errors") {
    const auto dir = test::scratch_dir("hier_errors");
    SUBCASE("missing feature file") {
        json doc = {{"nodes", three_node_json()}, {"features", {{"path", "nope.bin"}, {"dim", 4}, {"ids", {"a1"}}}}};
        std::ofstream(dir / "m.json") << doc.dump();
        CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("nope.bin"), DataError);
    }
    SUBCASE("dimension mismatch") {
        write_csv_manifest(dir, three_node_json(), 4, {"a1", "a2", "b1"});
        json doc = json::parse(std::ifstream(dir / "manifest.json"));
        doc["features"]["dim"] = 5;
        std::ofstream(dir / "manifest.json") << doc.dump();
        CHECK_THROWS_WITH_AS(load_manifest(dir / "manifest.json"), doctest::Contains("dimension mismatch"), DataError);
    }
    SUBCASE("ragged CSV rows name the image") {
        std::ofstream(dir / "features.csv") << "a1,1,2,3\na2,1,2\nb1,1,2,3\n";
        json doc = {{"nodes", three_node_json()}, {"features", {{"path", "features.csv"}, {"dim", 3}, {"format", "csv"}}}};
        std::ofstream(dir / "m.json") << doc.dump();
        CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("a2"), DataError);
    }
    SUBCASE("image without features") {
        const auto m = write_csv_manifest(dir, three_node_json(), 2, {"a1", "a2"});
        CHECK_THROWS_WITH_AS(load_manifest(m), doctest::Contains("b1"), DataError);
    }
    SUBCASE("cycle in manifest") {
        json nodes = json::array({{{"id", "root"}, {"parent", nullptr}, {"images", json::array()}},
                                  {{"id", "A"}, {"parent", "B"}, {"images", json::array()}},
                                  {{"id", "B"}, {"parent", "A"}, {"images", json::array()}}});
        const auto m = write_csv_manifest(dir, nodes, 2, {"x"});
        CHECK_THROWS_WITH_AS(load_manifest(m), doctest::Contains("cycle"), DataError);
    }
    SUBCASE("bad split") {
        const auto m = write_csv_manifest(dir, three_node_json(), 2, {"a1", "a2", "b1"}, {{"splits", {{"a1", "holdout"}}}});
        CHECK_THROWS_WITH_AS(load_manifest(m), doctest::Contains("holdout"), DataError);
    }
    SUBCASE("not JSON") {
        std::ofstream(dir / "m.json") << "{nodes:";
        CHECK_THROWS_AS(load_manifest(dir / "m.json"), DataError);
    }
    SUBCASE("binary file with wrong magic") {
        std::ofstream(dir / "f.bin", std::ios::binary) << "not a feature file at all";
        json doc = {{"nodes", three_node_json()}, {"features", {{"path", "f.bin"}, {"dim", 4}, {"ids", {"a1"}}}}};
        std::ofstream(dir / "m.json") << doc.dump();
        CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("magic"), DataError);
    }
}

TEST_CASE("labels by name or index and splits are applied") {
    const auto dir = test::scratch_dir("hier_labels");
    const auto m = write_csv_manifest(dir, three_node_json(), 2, {"a1", "a2", "b1"},
                                      {{"classes", {"cat", "dog"}},
                                       {"labels", {{"a1", "dog"}, {"b1", 0}}},
                                       {"splits", {{"a2", "probe_val"}, {"b1", "probe_train"}}}});
    const Dataset d = load_manifest(m);
    CHECK(d.class_names == std::vector<std::string>{"cat", "dog"});
    CHECK(d.records[d.index_of("a1")].label == 1);
    CHECK(d.records[d.index_of("b1")].label == 0);
    CHECK_FALSE(d.records[d.index_of("a2")].label.has_value());
    CHECK(d.records[d.index_of("a2")].split == Split::probe_val);
    CHECK(d.records[d.index_of("a1")].split == Split::pretrain);
}

TEST_CASE("split hygiene: probe_val never reaches pretraining pools") {
    Dataset d = generate(synth_preset("small"));
    const auto raw = build_pools(d.tree);
    CHECK_THROWS_WITH_AS(check_split_hygiene(raw, d), doctest::Contains("probe_val"), DataError);
    const auto clean = pretraining_pools(raw, d);
    CHECK_NOTHROW(check_split_hygiene(clean, d));
    std::set<ImageId> val;
    for (const auto& r : d.records)
        if (r.split == Split::probe_val) val.insert(r.id);
    REQUIRE_FALSE(val.empty());
    for (const auto& [id, pool] : clean)
        for (const auto& img : pool) CHECK(val.count(img) == 0);
}

TEST_CASE("level-1 concept of each image") {
    const Dataset d = generate(synth_preset("small"));
    const auto l1 = level1_concepts(d);
    REQUIRE(l1.size() == d.records.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        const auto& id = d.records[i].id;
        CHECK(l1[i] == id.substr(0, 2));  // synthetic ids start with the level-1 node "cK"
    }
}

TEST_CASE("split names round trip") {
    for (auto s : {Split::pretrain, Split::probe_train, Split::probe_val}) CHECK(parse_split(to_string(s)) == s);
    CHECK_THROWS_AS(parse_split("train"), DataError);
}

}
