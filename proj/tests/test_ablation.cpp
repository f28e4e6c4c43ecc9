#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "hcl/ablation.hpp"
#include "hcl/error.hpp"
#include "hcl/synth.hpp"

using namespace hcl;
using nlohmann::json;

namespace {

AblationPlan quick_plan(AblationAxis axis, std::vector<json> values, std::string preset = "small") {
    AblationPlan p;
    p.axis = axis;
    p.values = std::move(values);
    p.preset = std::move(preset);
    p.base_config_json = {{"train", {{"steps_per_level", 15}, {"triplet_batch_size", 4}}},
                          {"encoder", {{"d_mid", 32}, {"d_h1", 16}, {"d_out", 8}}}};
    p.base_config = config_from_json(p.base_config_json);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("ablation") {

TEST_CASE("replay sweep has one row per value and the best row at zero") {
    const auto plan = quick_plan(AblationAxis::replay, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, "forgetting");
    const auto rep = run_ablation(plan);
    REQUIRE(rep.rows.size() == 6);
    double best = 0;
    for (const auto& row : rep.rows) {
        REQUIRE(row.mAP_star.has_value());
        best = std::max(best, *row.mAP_star);
    }
    int zeros = 0;
    for (const auto& row : rep.rows) {
        CHECK(*row.relative_mAP_star == doctest::Approx((best - *row.mAP_star) / best));
        CHECK(*row.relative_mAP_star >= 0.0);
        zeros += *row.relative_mAP_star == 0.0;
    }
    CHECK(zeros >= 1);
    CHECK(rep.base_config_hash == config_hash(plan.base_config_json));
    CHECK(rep.rows[1].label == "0.2");
}

TEST_CASE("hierarchy level zero is the untrained baseline") {
    const auto plan = quick_plan(AblationAxis::hierarchy_level, {0, 1});
    const auto rep = run_ablation(plan);
    REQUIRE(rep.rows.size() == 2);
    const Dataset data = generate(synth_preset("small"));
    const auto baseline = run_probe(make_encoder(plan.base_config, data.dim), data, plan.base_config.probe, "x");
    REQUIRE(rep.rows[0].runs[0].ok);
    CHECK(rep.rows[0].runs[0].report->mAP == baseline.mAP);
    CHECK(rep.rows[1].runs[0].report->mAP != baseline.mAP);
}

TEST_CASE("dataset size sweep yields a probe report per preset") {
    auto plan = quick_plan(AblationAxis::dataset_size, {"small", "medium", "large"});
    plan.base_config.train.steps_per_level = 5;
    const auto rep = run_ablation(plan);
    REQUIRE(rep.rows.size() == 3);
    std::size_t last_n = 0;
    for (const auto& row : rep.rows) {
        REQUIRE(row.runs.size() == 1);
        REQUIRE(row.runs[0].ok);
        CHECK(row.runs[0].report->n_val > last_n);
        last_n = row.runs[0].report->n_val;
    }
}

TEST_CASE("failed runs are recorded and the rest continue") {
    // a NaN in one pretraining image aborts pretraining; probing alone still works
    const auto dir = test::scratch_dir("ablation_fail");
    Dataset data = generate(synth_preset("small"));
    for (auto& r : data.records)
        if (r.split == Split::pretrain) {
            r.features[0] = NAN;
            break;
        }
    write_manifest(data, dir / "manifest.json");
    auto plan = quick_plan(AblationAxis::hierarchy_level, {0, 1, 2});
    plan.base_config.train.steps_per_level = 400;
    plan.manifest = dir / "manifest.json";
    std::ostringstream progress;
    const auto rep = run_ablation(plan, &progress);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].runs[0].ok);
    CHECK_FALSE(rep.rows[1].runs[0].ok);
    CHECK_FALSE(rep.rows[2].runs[0].ok);
    CHECK(rep.rows[1].runs[0].error.find("aborted") != std::string::npos);
    CHECK_FALSE(rep.rows[1].mAP_star.has_value());
    CHECK(*rep.rows[0].relative_mAP_star == 0.0);
    CHECK(progress.str().find("failed") != std::string::npos);

    const auto files = write_ablation_report(rep, dir / "out");
    CHECK(files.size() == 3);
    const std::string csv = slurp(dir / "out" / "ablation.csv");
    CHECK(csv.rfind("# base_config_hash=" + rep.base_config_hash, 0) == 0);
    CHECK(csv.find("axis,value,mAP,mAP_star,relative_mAP_star,ok_runs,failed_runs") != std::string::npos);
    const auto j = json::parse(slurp(dir / "out" / "ablation.json"));
    CHECK(j.at("base_config_hash") == rep.base_config_hash);
    CHECK(j.at("rows").at(1).at("runs").at(0).at("ok") == false);
    CHECK(slurp(dir / "out" / "ablation.svg").find("<svg") != std::string::npos);
}

TEST_CASE("missing data fails every run without throwing") {
    auto plan = quick_plan(AblationAxis::replay, {0.0, 0.5});
    plan.manifest = "/nonexistent/manifest.json";
    const auto rep = run_ablation(plan);
    for (const auto& row : rep.rows) {
        CHECK_FALSE(row.runs[0].ok);
        CHECK_FALSE(row.runs[0].error.empty());
    }
}

TEST_CASE("repeats and seed policies") {
    auto plan = quick_plan(AblationAxis::replay, {0.5});
    plan.repeats = 2;
    plan.seed_policy = SeedPolicy::fixed;
    const auto fixed = run_ablation(plan);
    CHECK(fixed.rows[0].runs[0].report->mAP == fixed.rows[0].runs[1].report->mAP);
    plan.seed_policy = SeedPolicy::offset;
    const auto offset = run_ablation(plan);
    CHECK(offset.rows[0].runs[0].report->mAP != offset.rows[0].runs[1].report->mAP);
    CHECK(*offset.rows[0].mAP ==
          doctest::Approx((offset.rows[0].runs[0].report->mAP + offset.rows[0].runs[1].report->mAP) / 2));
}

TEST_CASE("plan parsing and validation") {
    const auto plan = ablation_plan_from_json(
        {{"axis", "replay"}, {"values", {0.0, 0.5}}, {"repeats", 2}, {"config", {{"train", {{"h_max", 1}}}}}});
    CHECK(plan.axis == AblationAxis::replay);
    CHECK(plan.repeats == 2);
    CHECK(plan.base_config.train.h_max == 1);
    CHECK_THROWS_AS(ablation_plan_from_json({{"axis", "depth"}, {"values", {1}}}), ConfigError);
    CHECK_THROWS_AS(ablation_plan_from_json({{"axis", "replay"}}), ConfigError);
    CHECK_THROWS_AS(ablation_plan_from_json({{"axis", "replay"}, {"values", {0.5}}, {"extra", 1}}), ConfigError);
    CHECK_THROWS_AS(run_ablation(quick_plan(AblationAxis::replay, {1.5})), ConfigError);
    CHECK_THROWS_AS(run_ablation(quick_plan(AblationAxis::hierarchy_level, {-1})), ConfigError);
    CHECK_THROWS_AS(run_ablation(quick_plan(AblationAxis::dataset_size, {"huge"})), ConfigError);
    CHECK_THROWS_AS(run_ablation(quick_plan(AblationAxis::replay, {})), ConfigError);
    CHECK(parse_axis("dataset_size") == AblationAxis::dataset_size);
}

}
