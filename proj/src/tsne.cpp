#include <algorithm>
#include <cmath>
#include <string>

#include "hcl/error.hpp"
#include "hcl/kernels.hpp"
#include "hcl/rng.hpp"
#include "hcl/viz.hpp"

namespace hcl {

TsneResult tsne(const Matrix& x, const TsneConfig& config) {
    const std::size_t n = x.rows();
    if (!(config.perplexity > 0.0)) throw ConfigError("t-SNE perplexity must be positive");
    if (!(3.0 * config.perplexity < static_cast<double>(n) - 1.0))
        throw ConfigError("t-SNE perplexity " + std::to_string(config.perplexity) +
                          " infeasible for " + std::to_string(n) + " points (need perplexity < (n-1)/3)");
    if (config.iterations < 1) throw ConfigError("t-SNE iterations must be >= 1");
    if (!(config.learning_rate >= 0.0)) throw ConfigError("t-SNE learning rate must be >= 0");
    // a fixed 200 oscillates on a few hundred points
    const double learning_rate =
        config.learning_rate > 0.0
            ? config.learning_rate
            : std::max(static_cast<double>(n) / config.early_exaggeration / 4.0, 50.0);

    const Matrix d2 = kernels::pairwise_sq_dists(x);
    const Matrix cond = kernels::conditional_affinities(d2, {config.perplexity, 1e-5, 200});

    Matrix p(n, n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            p(i, j) = cond(i, j) + cond(j, i);
            sum += p(i, j);
        }
    for (double& v : p.flat()) {
        v /= sum;
        if (!std::isfinite(v)) throw NumericError("t-SNE: non-finite joint affinities");
    }
    for (double& v : p.flat()) v *= config.early_exaggeration;
    bool exaggerated = true;

    Rng rng = derive_stream(config.seed, 0x74736e65);
    TsneResult out;
    out.coords = Matrix(n, 2);
    for (double& v : out.coords.flat()) v = 1e-4 * standard_normal(rng);
    Matrix& y = out.coords;
    Matrix update(n, 2);
    Matrix gains(n, 2, 1.0);
    double momentum = config.initial_momentum;

    for (int iter = 0; iter < config.iterations; ++iter) {
        const auto g = kernels::tsne_gradient(p, y);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double gi = g.grad.flat()[i];
            double& gain = gains.flat()[i];
            double& u = update.flat()[i];
            gain = (gi > 0.0) != (u > 0.0) ? gain + 0.2 : gain * 0.8;
            if (gain < 0.01) gain = 0.01;
            u = momentum * u - learning_rate * gain * gi;
            y.flat()[i] += u;
        }
        for (std::size_t c = 0; c < 2; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
        }

        if (exaggerated && iter + 1 >= config.exaggeration_iters) {
            for (double& v : p.flat()) v /= config.early_exaggeration;
            exaggerated = false;
        }
        if (iter + 1 == config.momentum_switch_iter) momentum = config.final_momentum;

        const bool last = iter + 1 == config.iterations;
        if ((iter + 1) % config.kl_every == 0 || last) {
            const double kl = kernels::tsne_kl(p, y);
            if (!std::isfinite(kl)) throw NumericError("t-SNE: KL divergence became non-finite");
            out.kl_trace.push_back({iter + 1, kl, exaggerated});
            if (last) out.final_kl = kl;
        }
    }
    return out;
}

Projection project(const Matrix& embeddings, const ProjectionConfig& config) {
    Projection out;
    Matrix input = embeddings;
    if (!config.skip_pca) {
        const std::size_t k =
            std::max<std::size_t>(1, std::min({config.pca_dim, embeddings.cols(), embeddings.rows()}));
        auto reduced = pca(embeddings, k);
        out.pca_dim_used = k;
        out.explained_variance_ratio = reduced.explained_variance_ratio;
        input = std::move(reduced.projected);
    }
    auto t = tsne(input, config.tsne);
    out.coords = std::move(t.coords);
    out.kl_trace = std::move(t.kl_trace);
    out.final_kl = t.final_kl;
    return out;
}

}  // namespace hcl
