#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "hcl/matrix.hpp"

namespace hcl {

struct EncoderDims {
    std::size_t d_in = 0;
    std::size_t d_mid = 256;
    std::size_t d_h1 = 128;
    std::size_t d_out = 64;

    bool operator==(const EncoderDims&) const = default;
};

// Named view of one parameter block, used by the optimizer and by
// checkpoints.
struct ParamBlock {
    std::string_view name;
    std::span<double> values;
};

struct ConstParamBlock {
    std::string_view name;
    std::span<const double> values;
};

// Trainable two-layer head. Biases are stored as 1 x n matrices.
struct HeadParams {
    Matrix w1, b1, w2, b2;

    static HeadParams zeros(const EncoderDims& dims);
    std::array<ParamBlock, 4> blocks();
    std::array<ConstParamBlock, 4> blocks() const;

    bool operator==(const HeadParams&) const = default;
};

// Intermediate values of a head forward pass, kept for backpropagation.
struct HeadActivations {
    Matrix input;  // backbone features, n x d_mid
    Matrix pre1;   // input * w1 + b1
    Matrix h1;     // relu(pre1)
    Matrix raw;    // h1 * w2 + b2
    Matrix out;    // raw, or raw row-normalized when normalization is on
};

// Frozen random-projection backbone (d_in -> d_mid, rectified) followed by a
// trainable head: relu(z W1 + b1) W2 + b2. The embedding itself is linear.
class Encoder {
public:
    Encoder() = default;
    Encoder(EncoderDims dims, std::uint64_t seed, bool normalize_embeddings = false);
    Encoder(EncoderDims dims, std::uint64_t seed, bool normalize_embeddings, Matrix backbone,
            HeadParams head);

    const EncoderDims& dims() const noexcept { return dims_; }
    std::uint64_t seed() const noexcept { return seed_; }
    bool normalizes() const noexcept { return normalize_; }
    const Matrix& backbone() const noexcept { return backbone_; }
    const HeadParams& head() const noexcept { return head_; }
    HeadParams& head() noexcept { return head_; }

    Matrix backbone_features(const Matrix& x) const;
    HeadActivations forward_head(const Matrix& features) const;
    Matrix encode(const Matrix& x) const;
    std::vector<double> encode(std::span<const double> x) const;

    // Gradients of the head parameters given dLoss/dEmbedding for every row
    // of a forward pass. The backbone receives no gradient.
    HeadParams grad_head(const HeadActivations& acts, const Matrix& grad_out) const;

private:
    EncoderDims dims_;
    std::uint64_t seed_ = 0;
    bool normalize_ = false;
    Matrix backbone_;
    HeadParams head_;
};

// Central differences of a scalar function of `params`; each entry is
// perturbed in place and restored. Independent of any analytic gradient.
std::vector<double> central_difference(const std::function<double()>& loss,
                                       std::span<double> params, double step);

}  // namespace hcl
