#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hcl/matrix.hpp"

namespace hcl {

// Maps arbitrary string labels to dense indices in first-seen order.
// Empty strings map to -1.
std::vector<int> encode_labels(std::span<const std::string> labels);

// Mean silhouette coefficient over points with a label >= 0; Euclidean.
// Points alone in their cluster contribute 0.
double silhouette_score(const Matrix& x, std::span<const int> labels);

// Mean Euclidean distance between the centroids of every pair of classes
// (labels < 0 ignored). 0 with fewer than two classes.
double mean_interclass_distance(const Matrix& x, std::span<const int> labels);

// Trace of the sample covariance.
double total_variance(const Matrix& x);

// Lloyd's k-means with k-means++ seeding; the restart with lowest inertia wins.
std::vector<int> kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts = 10,
                        int max_iters = 300);

// Best fraction of points whose cluster matches their label under a
// one-to-one relabelling of clusters (exhaustive over permutations, k <= 8).
double cluster_agreement(std::span<const int> clusters, std::span<const int> labels);

}  // namespace hcl
