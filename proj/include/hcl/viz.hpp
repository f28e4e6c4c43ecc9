#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hcl/matrix.hpp"

namespace hcl {

struct PcaResult {
    Matrix projected;    // n x k, mean-centered scores
    Matrix components;   // k x d, orthonormal rows
    std::vector<double> mean;
    std::vector<double> explained_variance_ratio;  // non-increasing
    bool zero_variance = false;
};

// Throws std::invalid_argument when n < 2 or k is outside [1, min(n, d)].
// Zero-variance input yields zero scores and zero_variance = true.
PcaResult pca(const Matrix& x, std::size_t k);

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double learning_rate = 0.0;  // 0: max(n / early_exaggeration / 4, 50)
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    std::uint64_t seed = 1;
    int kl_every = 50;
};

struct KlSample {
    int iteration;
    double kl;
    bool exaggerated;
};

struct TsneResult {
    Matrix coords;  // n x 2
    std::vector<KlSample> kl_trace;
    double final_kl = 0.0;
};

// Exact O(n^2) t-SNE with perplexity bisection, symmetrized affinities,
// Student-t output kernel, momentum, per-parameter gains and early
// exaggeration. Throws ConfigError when 3 * perplexity >= n - 1.
TsneResult tsne(const Matrix& x, const TsneConfig& config);

struct ProjectionConfig {
    std::size_t pca_dim = 50;
    bool skip_pca = false;
    TsneConfig tsne;
};

struct Projection {
    Matrix coords;
    std::size_t pca_dim_used = 0;  // 0 when PCA was skipped
    std::vector<double> explained_variance_ratio;
    std::vector<KlSample> kl_trace;
    double final_kl = 0.0;
};

// PCA to min(pca_dim, d, n) dimensions, then t-SNE to 2-D.
Projection project(const Matrix& embeddings, const ProjectionConfig& config);

enum class ColorBy { level1, probe_class, both };

struct ProjectionRow {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    std::string level1_concept;
    std::string probe_class;

    bool operator==(const ProjectionRow&) const = default;
};

// Writes <dir>/projection.csv (id,x,y,level1_concept,probe_class) plus one
// SVG scatter per requested coloring: projection_level1.svg and/or
// projection_class.svg. Returns the files written.
std::vector<std::filesystem::path> export_projection(const std::filesystem::path& dir,
                                                     const std::vector<ProjectionRow>& rows,
                                                     ColorBy color_by);

std::vector<ProjectionRow> read_projection_csv(const std::filesystem::path& path);

// Small SVG scatter writer; one <g class="group"> per distinct label.
std::string render_scatter_svg(const std::vector<std::pair<double, double>>& points,
                               const std::vector<std::string>& labels, const std::string& title);

// Line plot with one marker per point (used by the ablation harness).
std::string render_line_svg(const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::vector<std::string>& x_labels, const std::string& title,
                            const std::string& y_label);

}  // namespace hcl
