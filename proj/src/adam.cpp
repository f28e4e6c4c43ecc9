#include "hcl/adam.hpp"

#include <cmath>

#include "hcl/error.hpp"

namespace hcl {

AdamState::AdamState(AdamConfig config, const std::vector<std::size_t>& block_sizes)
    : config_(config) {
    for (std::size_t n : block_sizes) {
        m_.emplace_back(n, 0.0);
        v_.emplace_back(n, 0.0);
    }
}

void AdamState::step(std::span<const ParamBlock> params, std::span<const ConstParamBlock> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw NumericError("adam: expected " + std::to_string(m_.size()) + " parameter blocks");
    for (std::size_t b = 0; b < m_.size(); ++b) {
        if (params[b].values.size() != m_[b].size() || grads[b].values.size() != m_[b].size())
            throw NumericError("adam: shape mismatch in block " + std::string(params[b].name));
        for (double g : grads[b].values)
            if (!std::isfinite(g))
                throw NumericError("adam: non-finite gradient in block " + std::string(grads[b].name));
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t b = 0; b < m_.size(); ++b) {
        auto p = params[b].values;
        auto g = grads[b].values;
        auto& m = m_[b];
        auto& v = v_[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

void AdamState::restore(std::uint64_t steps, std::vector<std::vector<double>> m,
                        std::vector<std::vector<double>> v) {
    if (m.size() != m_.size() || v.size() != v_.size())
        throw DataError("adam: restored state has wrong block count");
    for (std::size_t b = 0; b < m_.size(); ++b)
        if (m[b].size() != m_[b].size() || v[b].size() != v_[b].size())
            throw DataError("adam: restored state has wrong block shape");
    steps_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
}

AdamState make_head_optimizer(const Encoder& encoder, AdamConfig config) {
    return AdamState::for_blocks(config, encoder.head().blocks());
}

void adam_step(AdamState& state, HeadParams& params, const HeadParams& grads) {
    const auto p = params.blocks();
    const auto g = grads.blocks();
    state.step(p, g);
}

}  // namespace hcl
