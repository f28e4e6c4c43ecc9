#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hcl/encoder.hpp"

namespace hcl {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

// Adam with bias correction. Moments are kept per parameter block in the
// order the blocks are passed to step().
class AdamState {
public:
    AdamState() = default;
    AdamState(AdamConfig config, const std::vector<std::size_t>& block_sizes);

    template <std::size_t N>
    static AdamState for_blocks(AdamConfig config, const std::array<ConstParamBlock, N>& blocks) {
        std::vector<std::size_t> sizes;
        for (const auto& b : blocks) sizes.push_back(b.values.size());
        return AdamState(config, sizes);
    }

    // Applies one update. Validates shapes and finiteness of every gradient
    // block before touching any parameter; throws NumericError naming the
    // offending block.
    void step(std::span<const ParamBlock> params, std::span<const ConstParamBlock> grads);

    const AdamConfig& config() const noexcept { return config_; }
    std::uint64_t steps() const noexcept { return steps_; }
    const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
    const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

    // Restores state read from a checkpoint.
    void restore(std::uint64_t steps, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v);

    bool operator==(const AdamState&) const = default;

private:
    AdamConfig config_;
    std::uint64_t steps_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Convenience for the encoder head.
AdamState make_head_optimizer(const Encoder& encoder, AdamConfig config);
void adam_step(AdamState& state, HeadParams& params, const HeadParams& grads);

}  // namespace hcl
