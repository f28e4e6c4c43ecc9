#include "hcl/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcl/error.hpp"

namespace hcl::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::vector<double> column_means(const Matrix& x) {
    std::vector<double> mean(x.cols(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += x(r, c);
    for (double& m : mean) m /= static_cast<double>(x.rows());
    return mean;
}

// Calibrates one row in place; returns false when the result is not finite.
bool calibrate_row(const Matrix& d, std::size_t i, const AffinityOptions& opts, double* out) {
    const std::size_t n = d.rows();
    const double target = std::log(opts.perplexity);
    double dmin = INFINITY;
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) dmin = std::min(dmin, d(i, j));
    double beta = 1.0, lo = -INFINITY, hi = INFINITY;
    for (int it = 0; it < opts.max_iters; ++it) {
        double sum = 0.0, weighted = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                out[j] = 0.0;
                continue;
            }
            const double shifted = d(i, j) - dmin;
            out[j] = std::exp(-beta * shifted);
            sum += out[j];
            weighted += shifted * out[j];
        }
        const double entropy = std::log(sum) + beta * weighted / sum;
        const double diff = entropy - target;
        if (std::fabs(diff) < opts.tolerance) break;
        if (diff > 0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
        } else {
            hi = beta;
            beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
        }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += out[j];
    bool finite = sum > 0.0 && std::isfinite(sum);
    for (std::size_t j = 0; j < n; ++j) {
        out[j] /= sum;
        finite = finite && std::isfinite(out[j]);
    }
    return finite;
}

}  // namespace

namespace serial {

Matrix conditional_affinities(const Matrix& sq_dists, const AffinityOptions& opts) {
    require(sq_dists.rows() == sq_dists.cols(), "conditional_affinities: square matrix required");
    Matrix p(sq_dists.rows(), sq_dists.cols());
    for (std::size_t i = 0; i < p.rows(); ++i)
        if (!calibrate_row(sq_dists, i, opts, p.data() + i * p.cols()))
            throw NumericError("non-finite affinities in row " + std::to_string(i));
    return p;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "matmul_tn: row counts differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, i) * b(r, j);
            c(i, j) = s;
        }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "matmul_nt: column counts differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    return c;
}

Matrix pairwise_sq_dists(const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < x.cols(); ++k) {
                const double diff = x(i, k) - x(j, k);
                s += diff * diff;
            }
            d(i, j) = s;
        }
    return d;
}

Matrix covariance(const Matrix& x) {
    require(x.rows() >= 2, "covariance: need at least two rows");
    const auto mean = column_means(x);
    const std::size_t d = x.cols();
    Matrix cov(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < x.rows(); ++r)
                s += (x(r, i) - mean[i]) * (x(r, j) - mean[j]);
            cov(i, j) = s / static_cast<double>(x.rows() - 1);
        }
    return cov;
}

TsneGradient tsne_gradient(const Matrix& p, const Matrix& y) {
    const std::size_t n = y.rows();
    require(p.rows() == n && p.cols() == n, "tsne_gradient: P must be n x n");
    Matrix num(n, n);
    std::vector<double> row_z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < y.cols(); ++k) {
                const double diff = y(i, k) - y(j, k);
                s += diff * diff;
            }
            num(i, j) = 1.0 / (1.0 + s);
            row_z[i] += num(i, j);
        }
    double z = 0.0;
    for (double v : row_z) z += v;

    TsneGradient out{Matrix(n, y.cols()), z};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double mult = (p(i, j) - num(i, j) / z) * num(i, j);
            for (std::size_t k = 0; k < y.cols(); ++k)
                out.grad(i, k) += 4.0 * mult * (y(i, k) - y(j, k));
        }
    return out;
}

double tsne_kl(const Matrix& p, const Matrix& y) {
    const std::size_t n = y.rows();
    require(p.rows() == n && p.cols() == n, "tsne_kl: P must be n x n");
    Matrix num(n, n);
    std::vector<double> row_z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < y.cols(); ++k) {
                const double diff = y(i, k) - y(j, k);
                s += diff * diff;
            }
            num(i, j) = 1.0 / (1.0 + s);
            row_z[i] += num(i, j);
        }
    double z = 0.0;
    for (double v : row_z) z += v;
    std::vector<double> row_kl(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || p(i, j) <= 0.0) continue;
            row_kl[i] += p(i, j) * std::log(p(i, j) / (num(i, j) / z));
        }
    double kl = 0.0;
    for (double v : row_kl) kl += v;
    return kl;
}

}  // namespace serial

namespace omp {

Matrix conditional_affinities(const Matrix& sq_dists, const AffinityOptions& opts) {
    require(sq_dists.rows() == sq_dists.cols(), "conditional_affinities: square matrix required");
    const std::size_t n = sq_dists.rows();
    Matrix p(n, n);
    std::vector<char> ok(n, 1);
#pragma omp parallel for schedule(dynamic, 8) if (n * n >= kParallelWork)
    for (std::size_t i = 0; i < n; ++i)
        ok[i] = calibrate_row(sq_dists, i, opts, p.data() + i * n) ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!ok[i]) throw NumericError("non-finite affinities in row " + std::to_string(i));
    return p;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
    Matrix c(n, m);
    const bool par = n * inner * m >= kParallelWork;
    // i-k-j order streams rows of b; each c(i, j) still accumulates k = 0..inner-1.
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.data() + i * m;
        const double* ai = a.data() + i * inner;
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = ai[k];
            const double* bk = b.data() + k * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "matmul_tn: row counts differ");
    const std::size_t rows = a.rows(), p = a.cols(), q = b.cols();
    Matrix c(p, q);
    const bool par = rows * p * q >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < p; ++i) {
        double* ci = c.data() + i * q;
        for (std::size_t r = 0; r < rows; ++r) {
            const double ari = a.data()[r * p + i];
            const double* br = b.data() + r * q;
            for (std::size_t j = 0; j < q; ++j) ci[j] += ari * br[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "matmul_nt: column counts differ");
    const std::size_t n = a.rows(), m = b.rows(), inner = a.cols();
    Matrix c(n, m);
    const bool par = n * inner * m >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.data() + i * inner;
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b.data() + j * inner;
            double s = 0.0;
            for (std::size_t k = 0; k < inner; ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

Matrix pairwise_sq_dists(const Matrix& x) {
    const std::size_t n = x.rows(), d = x.cols();
    Matrix out(n, n);
    const bool par = n * n * d >= kParallelWork;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            const double* xj = x.data() + j * d;
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = xi[k] - xj[k];
                s += diff * diff;
            }
            out(i, j) = s;
        }
    }
    return out;
}

Matrix covariance(const Matrix& x) {
    require(x.rows() >= 2, "covariance: need at least two rows");
    const auto mean = column_means(x);
    const std::size_t n = x.rows(), d = x.cols();
    Matrix centered(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) centered(r, c) = x(r, c) - mean[c];
    Matrix cov = matmul_tn(centered, centered);
    const double denom = static_cast<double>(n - 1);
    for (double& v : cov.flat()) v /= denom;
    return cov;
}

namespace {

// Unnormalized Student-t kernel matrix plus per-row sums.
Matrix student_t(const Matrix& y, std::vector<double>& row_z) {
    const std::size_t n = y.rows(), d = y.cols();
    Matrix num(n, n);
    row_z.assign(n, 0.0);
    const bool par = n * n * d >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < n; ++i) {
        const double* yi = y.data() + i * d;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double* yj = y.data() + j * d;
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = yi[k] - yj[k];
                s += diff * diff;
            }
            const double q = 1.0 / (1.0 + s);
            num(i, j) = q;
            acc += q;
        }
        row_z[i] = acc;
    }
    return num;
}

}  // namespace

TsneGradient tsne_gradient(const Matrix& p, const Matrix& y) {
    const std::size_t n = y.rows(), d = y.cols();
    require(p.rows() == n && p.cols() == n, "tsne_gradient: P must be n x n");
    std::vector<double> row_z;
    const Matrix num = student_t(y, row_z);
    double z = 0.0;
    for (double v : row_z) z += v;

    TsneGradient out{Matrix(n, d), z};
    const bool par = n * n * d >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < n; ++i) {
        double* gi = out.grad.data() + i * d;
        const double* yi = y.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double mult = (p(i, j) - num(i, j) / z) * num(i, j);
            const double* yj = y.data() + j * d;
            for (std::size_t k = 0; k < d; ++k) gi[k] += 4.0 * mult * (yi[k] - yj[k]);
        }
    }
    return out;
}

double tsne_kl(const Matrix& p, const Matrix& y) {
    const std::size_t n = y.rows();
    require(p.rows() == n && p.cols() == n, "tsne_kl: P must be n x n");
    std::vector<double> row_z;
    const Matrix num = student_t(y, row_z);
    double z = 0.0;
    for (double v : row_z) z += v;
    std::vector<double> row_kl(n, 0.0);
    const bool par = n * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || p(i, j) <= 0.0) continue;
            acc += p(i, j) * std::log(p(i, j) / (num(i, j) / z));
        }
        row_kl[i] = acc;
    }
    double kl = 0.0;
    for (double v : row_kl) kl += v;
    return kl;
}

}  // namespace omp
}  // namespace hcl::kernels
