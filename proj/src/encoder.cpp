#include "hcl/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hcl/kernels.hpp"
#include "hcl/rng.hpp"

namespace hcl {
namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = stddev * standard_normal(rng);
    return m;
}

void add_bias(Matrix& m, const Matrix& bias) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
    }
}

Matrix column_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
    return out;
}

}  // namespace

HeadParams HeadParams::zeros(const EncoderDims& d) {
    return {Matrix(d.d_mid, d.d_h1), Matrix(1, d.d_h1), Matrix(d.d_h1, d.d_out), Matrix(1, d.d_out)};
}

std::array<ParamBlock, 4> HeadParams::blocks() {
    return {{{"w1", w1.flat()}, {"b1", b1.flat()}, {"w2", w2.flat()}, {"b2", b2.flat()}}};
}

std::array<ConstParamBlock, 4> HeadParams::blocks() const {
    return {{{"w1", w1.flat()}, {"b1", b1.flat()}, {"w2", w2.flat()}, {"b2", b2.flat()}}};
}

Encoder::Encoder(EncoderDims dims, std::uint64_t seed, bool normalize_embeddings)
    : dims_(dims), seed_(seed), normalize_(normalize_embeddings) {
    if (dims.d_in == 0 || dims.d_mid == 0 || dims.d_h1 == 0 || dims.d_out == 0)
        throw std::invalid_argument("encoder dimensions must be positive");
    Rng backbone_rng = derive_stream(seed, 0x62616b);
    Rng head_rng = derive_stream(seed, 0x68656164);
    backbone_ = gaussian(dims.d_in, dims.d_mid, 1.0 / std::sqrt(static_cast<double>(dims.d_in)),
                         backbone_rng);
    head_ = HeadParams::zeros(dims);
    head_.w1 = gaussian(dims.d_mid, dims.d_h1, std::sqrt(2.0 / static_cast<double>(dims.d_mid)), head_rng);
    head_.w2 = gaussian(dims.d_h1, dims.d_out, std::sqrt(1.0 / static_cast<double>(dims.d_h1)), head_rng);
}

Encoder::Encoder(EncoderDims dims, std::uint64_t seed, bool normalize_embeddings, Matrix backbone,
                 HeadParams head)
    : dims_(dims), seed_(seed), normalize_(normalize_embeddings), backbone_(std::move(backbone)),
      head_(std::move(head)) {
    if (backbone_.rows() != dims.d_in || backbone_.cols() != dims.d_mid ||
        head_.w1.rows() != dims.d_mid || head_.w1.cols() != dims.d_h1 ||
        head_.b1.cols() != dims.d_h1 || head_.w2.rows() != dims.d_h1 ||
        head_.w2.cols() != dims.d_out || head_.b2.cols() != dims.d_out)
        throw std::invalid_argument("encoder parameter shapes do not match dimensions");
}

Matrix Encoder::backbone_features(const Matrix& x) const {
    if (x.cols() != dims_.d_in)
        throw std::invalid_argument("encoder expects " + std::to_string(dims_.d_in) +
                                    "-dim input, got " + std::to_string(x.cols()));
    Matrix z = kernels::matmul(x, backbone_);
    for (double& v : z.flat()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
    return z;
}

HeadActivations Encoder::forward_head(const Matrix& features) const {
    if (features.cols() != dims_.d_mid)
        throw std::invalid_argument("head expects " + std::to_string(dims_.d_mid) + "-dim features");
    HeadActivations a;
    a.input = features;
    a.pre1 = kernels::matmul(features, head_.w1);
    add_bias(a.pre1, head_.b1);
    a.h1 = a.pre1;
    for (double& v : a.h1.flat()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
    a.raw = kernels::matmul(a.h1, head_.w2);
    add_bias(a.raw, head_.b2);
    a.out = a.raw;
    if (normalize_) {
        for (std::size_t r = 0; r < a.out.rows(); ++r) {
            auto row = a.out.row(r);
            double norm = 0.0;
            for (double v : row) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 0.0)
                for (double& v : row) v /= norm;
        }
    }
    return a;
}

Matrix Encoder::encode(const Matrix& x) const { return forward_head(backbone_features(x)).out; }

std::vector<double> Encoder::encode(std::span<const double> x) const {
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.row(0).begin());
    auto out = encode(m);
    return {out.flat().begin(), out.flat().end()};
}

HeadParams Encoder::grad_head(const HeadActivations& acts, const Matrix& grad_out) const {
    if (grad_out.rows() != acts.out.rows() || grad_out.cols() != dims_.d_out)
        throw std::invalid_argument("upstream gradient shape does not match embeddings");
    Matrix g_raw = grad_out;
    if (normalize_) {
        // d(r/|r|) = (I - u u^T) / |r|
        for (std::size_t r = 0; r < g_raw.rows(); ++r) {
            auto raw = acts.raw.row(r);
            auto unit = acts.out.row(r);
            auto g = g_raw.row(r);
            double norm = 0.0, dot = 0.0;
            for (std::size_t c = 0; c < raw.size(); ++c) {
                norm += raw[c] * raw[c];
                dot += unit[c] * g[c];
            }
            norm = std::sqrt(norm);
            for (std::size_t c = 0; c < g.size(); ++c)
                g[c] = norm > 0.0 ? (g[c] - unit[c] * dot) / norm : 0.0;
        }
    }
    HeadParams grads;
    grads.w2 = kernels::matmul_tn(acts.h1, g_raw);
    grads.b2 = column_sums(g_raw);
    Matrix g_pre1 = kernels::matmul_nt(g_raw, head_.w2);
    for (std::size_t i = 0; i < g_pre1.size(); ++i)
        if (!(acts.pre1.flat()[i] > 0.0)) g_pre1.flat()[i] = 0.0;
    grads.w1 = kernels::matmul_tn(acts.input, g_pre1);
    grads.b1 = column_sums(g_pre1);
    return grads;
}

std::vector<double> central_difference(const std::function<double()>& loss,
                                       std::span<double> params, double step) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = loss();
        params[i] = saved - step;
        const double down = loss();
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

}  // namespace hcl
