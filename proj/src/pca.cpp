#include <Eigen/Dense>

#include <iostream>
#include <stdexcept>

#include "hcl/kernels.hpp"
#include "hcl/viz.hpp"

namespace hcl {

PcaResult pca(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2) throw std::invalid_argument("pca: need at least two rows");
    if (k < 1 || k > std::min(n, d))
        throw std::invalid_argument("pca: k must be in [1, min(n, d)]");

    PcaResult out;
    out.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out.mean[c] += x(r, c);
    for (double& m : out.mean) m /= static_cast<double>(n);

    const Matrix cov = kernels::covariance(x);
    Eigen::MatrixXd c(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");

    // Eigen returns ascending eigenvalues; walk from the top.
    const auto& values = solver.eigenvalues();
    const auto& vectors = solver.eigenvectors();
    double total = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) total += std::max(0.0, values(i));

    out.components = Matrix(k, d);
    out.projected = Matrix(n, k);
    if (!(total > 0.0)) {
        std::cerr << "warning: pca input has zero variance; returning zeros\n";
        out.zero_variance = true;
        out.explained_variance_ratio.assign(k, 0.0);
        for (std::size_t i = 0; i < k; ++i) out.components(i, i) = 1.0;
        return out;
    }
    for (std::size_t i = 0; i < k; ++i) {
        const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - i);
        // Fix the sign so the largest-magnitude loading is positive.
        Eigen::Index arg = 0;
        vectors.col(col).cwiseAbs().maxCoeff(&arg);
        const double sign = vectors(arg, col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < d; ++j)
            out.components(i, j) = sign * vectors(static_cast<Eigen::Index>(j), col);
        out.explained_variance_ratio.push_back(std::max(0.0, values(col)) / total);
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < k; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (x(r, j) - out.mean[j]) * out.components(i, j);
            out.projected(r, i) = s;
        }
    return out;
}

}  // namespace hcl
