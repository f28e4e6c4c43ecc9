#include "hcl/embedding_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "hcl/kernels.hpp"
#include "hcl/rng.hpp"

namespace hcl {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

}  // namespace

std::vector<int> encode_labels(std::span<const std::string> labels) {
    std::map<std::string, int> ids;
    std::vector<int> out;
    for (const auto& l : labels) {
        if (l.empty()) {
            out.push_back(-1);
            continue;
        }
        auto [it, inserted] = ids.emplace(l, static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    return out;
}

double silhouette_score(const Matrix& x, std::span<const int> labels) {
    if (labels.size() != x.rows()) throw std::invalid_argument("silhouette: label count mismatch");
    const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    if (k < 2) throw std::invalid_argument("silhouette: need at least two clusters");
    const Matrix d2 = kernels::pairwise_sq_dists(x);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels)
        if (l >= 0) ++sizes[static_cast<std::size_t>(l)];

    double total = 0.0;
    std::size_t counted = 0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (labels[i] < 0) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < x.rows(); ++j)
            if (j != i && labels[j] >= 0) sums[static_cast<std::size_t>(labels[j])] += std::sqrt(d2(i, j));
        const auto own = static_cast<std::size_t>(labels[i]);
        ++counted;
        if (sizes[own] < 2) continue;
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c)
            if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return counted ? total / static_cast<double>(counted) : 0.0;
}

double mean_interclass_distance(const Matrix& x, std::span<const int> labels) {
    if (labels.size() != x.rows()) throw std::invalid_argument("interclass distance: label count mismatch");
    std::map<int, std::pair<std::vector<double>, std::size_t>> sums;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (labels[i] < 0) continue;
        auto& [sum, n] = sums[labels[i]];
        sum.resize(x.cols(), 0.0);
        const auto row = x.row(i);
        for (std::size_t k = 0; k < x.cols(); ++k) sum[k] += row[k];
        ++n;
    }
    std::vector<std::vector<double>> centroids;
    for (auto& [label, entry] : sums) {
        for (double& v : entry.first) v /= static_cast<double>(entry.second);
        centroids.push_back(std::move(entry.first));
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < centroids.size(); ++a)
        for (std::size_t b = a + 1; b < centroids.size(); ++b) {
            total += std::sqrt(sq_dist(centroids[a], centroids[b]));
            ++pairs;
        }
    return pairs ? total / static_cast<double>(pairs) : 0.0;
}

double total_variance(const Matrix& x) {
    const Matrix cov = kernels::covariance(x);
    double t = 0.0;
    for (std::size_t i = 0; i < cov.rows(); ++i) t += cov(i, i);
    return t;
}

std::vector<int> kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts, int max_iters) {
    const std::size_t n = x.rows(), d = x.cols();
    if (k < 1 || static_cast<std::size_t>(k) > n) throw std::invalid_argument("kmeans: bad k");
    std::vector<int> best;
    double best_inertia = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < restarts; ++rep) {
        Rng rng = derive_stream(seed, static_cast<std::uint64_t>(rep));
        Matrix centers(static_cast<std::size_t>(k), d);
        std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
        std::size_t first = uniform_index(rng, n);
        std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nearest[i] = std::min(nearest[i], sq_dist(x.row(i), centers.row(static_cast<std::size_t>(c - 1))));
                total += nearest[i];
            }
            std::size_t pick = n - 1;
            double target = uniform01(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                target -= nearest[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
            std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(static_cast<std::size_t>(c)).begin());
        }

        std::vector<int> assign(n, -1);
        for (int it = 0; it < max_iters; ++it) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                int arg = 0;
                double bestd = std::numeric_limits<double>::infinity();
                for (int c = 0; c < k; ++c) {
                    const double dd = sq_dist(x.row(i), centers.row(static_cast<std::size_t>(c)));
                    if (dd < bestd) {
                        bestd = dd;
                        arg = c;
                    }
                }
                if (assign[i] != arg) {
                    assign[i] = arg;
                    changed = true;
                }
            }
            if (!changed) break;
            Matrix sums(static_cast<std::size_t>(k), d);
            std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto c = static_cast<std::size_t>(assign[i]);
                ++counts[c];
                for (std::size_t j = 0; j < d; ++j) sums(c, j) += x(i, j);
            }
            for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
                if (counts[c] > 0)
                    for (std::size_t j = 0; j < d; ++j) centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        }
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inertia += sq_dist(x.row(i), centers.row(static_cast<std::size_t>(assign[i])));
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best = assign;
        }
    }
    return best;
}

double cluster_agreement(std::span<const int> clusters, std::span<const int> labels) {
    if (clusters.size() != labels.size()) throw std::invalid_argument("cluster_agreement: size mismatch");
    if (clusters.empty()) return 0.0;
    const int kc = *std::max_element(clusters.begin(), clusters.end()) + 1;
    const int kl = *std::max_element(labels.begin(), labels.end()) + 1;
    const int k = std::max(kc, kl);
    if (k > 8) throw std::invalid_argument("cluster_agreement: at most 8 clusters supported");
    std::vector<std::vector<std::size_t>> counts(static_cast<std::size_t>(k), std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
    for (std::size_t i = 0; i < clusters.size(); ++i)
        if (clusters[i] >= 0 && labels[i] >= 0)
            ++counts[static_cast<std::size_t>(clusters[i])][static_cast<std::size_t>(labels[i])];
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hit = 0;
        for (int c = 0; c < k; ++c) hit += counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(perm[static_cast<std::size_t>(c)])];
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(clusters.size());
}

}  // namespace hcl
