#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcl/encoder.hpp"
#include "hcl/hierarchy.hpp"

namespace hcl {

// How mAP* is formed. `pooled` is micro AP: all (sample, class) scores are
// ranked together, a pair relevant when the class is the sample's label.
// `class_weighted` is the class-frequency weighted mean of per-class AP.
enum class MapStarMode { pooled, class_weighted };

struct ProbeConfig {
    int batch_size = 64;
    int epochs = 4;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    MapStarMode map_star = MapStarMode::pooled;

    void validate() const;  // throws ConfigError
};

// Single linear layer followed by softmax.
struct SoftmaxProbe {
    Matrix weights;  // d x C
    Matrix bias;     // 1 x C

    Matrix probabilities(const Matrix& embeddings) const;
};

// Cross-entropy, Adam, exactly config.epochs passes with a seeded shuffle.
// Throws DataError listing every class index with no training example.
SoftmaxProbe train_probe(const Matrix& embeddings, std::span<const int> labels, int num_classes,
                         const ProbeConfig& config);

// Non-interpolated average precision: rank by descending score (ties keep
// input order) and average precision@k over the ranks k of relevant items.
// nullopt when nothing is relevant.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const bool> relevant);

struct ProbeReport {
    std::string model_name;
    std::vector<std::string> class_names;
    std::vector<std::optional<double>> per_class_ap;
    double mAP = 0.0;
    double mAP_star = 0.0;
    double mAP_star_pooled = 0.0;
    double mAP_star_class_weighted = 0.0;
    std::vector<std::optional<double>> per_class_precision;  // top-1 precision
    double accuracy = 0.0;
    std::size_t n_val = 0;
    std::vector<std::size_t> class_counts;

    nlohmann::json to_json() const;
    static ProbeReport from_json(const nlohmann::json& j);
};

// Metrics from per-sample class scores (rows) and true labels.
ProbeReport evaluate_scores(const Matrix& scores, std::span<const int> labels,
                            const std::vector<std::string>& class_names, MapStarMode mode,
                            std::string model_name = {});

// Encodes probe_train and probe_val records with a frozen encoder, trains the
// probe and evaluates on probe_val. Verifies the encoder is unchanged.
ProbeReport run_probe(const Encoder& encoder, const Dataset& data, const ProbeConfig& config,
                      std::string model_name);

}  // namespace hcl
