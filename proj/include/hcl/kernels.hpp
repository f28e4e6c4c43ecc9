#pragma once

// Dense kernels used by the encoder, the projection pipeline and the
// embedding statistics. Every kernel exists twice: a plain serial reference
// in `serial::` and an OpenMP version in `omp::`. The OpenMP versions assign
// each output element to exactly one thread and keep the serial summation
// order, so both produce bit-identical results for any thread count.

#include "hcl/matrix.hpp"

namespace hcl::kernels {

struct TsneGradient {
    Matrix grad;
    double z = 0.0;  // sum of unnormalized Student-t kernel values over i != j
};

// Row-wise Gaussian conditional affinities p(j|i) from squared distances,
// each row's precision found by bisection so its perplexity matches the
// target. Throws NumericError when a row cannot be calibrated to finite values.
struct AffinityOptions {
    double perplexity = 30.0;
    double tolerance = 1e-5;
    int max_iters = 200;
};

namespace serial {
Matrix conditional_affinities(const Matrix& sq_dists, const AffinityOptions& opts);
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix pairwise_sq_dists(const Matrix& x);
Matrix covariance(const Matrix& x);
TsneGradient tsne_gradient(const Matrix& p, const Matrix& y);
double tsne_kl(const Matrix& p, const Matrix& y);
}  // namespace serial

namespace omp {
Matrix conditional_affinities(const Matrix& sq_dists, const AffinityOptions& opts);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix pairwise_sq_dists(const Matrix& x);
Matrix covariance(const Matrix& x);
TsneGradient tsne_gradient(const Matrix& p, const Matrix& y);
double tsne_kl(const Matrix& p, const Matrix& y);
}  // namespace omp

// Library-wide entry points.
using omp::conditional_affinities;
using omp::covariance;
using omp::matmul;
using omp::matmul_nt;
using omp::matmul_tn;
using omp::pairwise_sq_dists;
using omp::tsne_gradient;
using omp::tsne_kl;

}  // namespace hcl::kernels
