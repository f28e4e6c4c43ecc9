#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcl/adam.hpp"
#include "hcl/encoder.hpp"
#include "hcl/hierarchy.hpp"
#include "hcl/rng.hpp"

namespace hcl {

// max(0, |a-p|^2 - |a-n|^2 + alpha) with squared Euclidean distances.
double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double alpha);

// alpha(h) = (h_max - h)^2 + alpha_min: wide margins between coarse concepts,
// narrow ones between leaves.
struct MarginSchedule {
    int h_max = 2;
    double alpha_min = 1.0;

    double operator()(int h) const;  // throws std::out_of_range outside [1, h_max]
};

struct Triplet {
    ImageId anchor;
    ImageId positive;
    ImageId negative;
    int level = 0;
    NodeId anchor_node;
    NodeId negative_node;
};

// Node-first triplet sampler. An anchor node is drawn uniformly among the
// eligible nodes of a level (pool of at least two images and at least one
// sibling with a non-empty pool), so nodes with many images are not favoured.
// Anchor and positive come from that node's pool without replacement; the
// negative comes from a uniformly drawn sibling's pool.
class TripletSampler {
public:
    TripletSampler(const ConceptTree& tree, const PoolMap& pools, int retry_budget = 16);

    std::vector<NodeId> eligible_nodes(int level) const;
    bool level_trainable(int level) const;

    // Throws SchedulingError when the level has no eligible node and
    // RetryExhausted when every attempt for the drawn anchor node produced an
    // image-id collision.
    Triplet sample(int level, Rng& rng) const;

private:
    struct Candidate {
        std::size_t node;                   // index into node_ids_
        std::vector<std::size_t> negatives;  // sibling node indices with non-empty pools
    };

    std::vector<NodeId> node_ids_;
    std::vector<std::vector<std::uint32_t>> pools_;  // interned image ids per node
    std::vector<ImageId> images_;
    std::vector<std::vector<Candidate>> by_level_;  // index = level
    int retry_budget_;
};

// Convenience wrapper matching the one-shot use; builds a sampler each call.
Triplet sample_triplet(const ConceptTree& tree, const PoolMap& pools, int level, Rng& rng);

// With probability 1 - r_p the current level, otherwise a level drawn
// uniformly from [1, current_level - 1]. Level 1 never replays.
int next_batch_level(double r_p, int current_level, Rng& rng);

class ReplayScheduler {
public:
    ReplayScheduler(double r_p, std::uint64_t seed);

    void set_current_level(int level);
    int current_level() const noexcept { return current_; }
    double replay_probability() const noexcept { return r_p_; }
    int next();

private:
    double r_p_;
    int current_ = 1;
    Rng rng_;
};

enum class PoolMode { descendant, owned_only };

struct TrainConfig {
    int h_max = 2;
    double alpha_min = 1.0;
    double r_p = 0.5;
    double learning_rate = 1e-4;
    int triplet_batch_size = 16;
    int steps_per_level = 500;
    std::uint64_t seed = 1;
    // Clamp h_max to the depth of the level-1 subtree an anchor lives in.
    bool adaptive_h_max = false;
    int retry_budget = 16;
    PoolMode pool_mode = PoolMode::descendant;

    void validate() const;  // throws ConfigError
};

struct TrainLogRecord {
    std::uint64_t step = 0;
    int level = 0;          // level the batch was drawn from
    int current_level = 0;  // curriculum level at that step
    double alpha = 0.0;
    double loss = 0.0;
    bool replay = false;
    bool skipped = false;
    bool aborted = false;  // non-finite loss or gradient; training stopped here
    std::string note;

    nlohmann::json to_json() const;
};

// Mean triplet loss over a batch laid out as consecutive (anchor, positive,
// negative) rows of backbone features, with one margin per triplet.
struct BatchLoss {
    double loss = 0.0;
    HeadParams grads;
};
BatchLoss triplet_batch_loss(const Encoder& encoder, const Matrix& features,
                             std::span<const double> margins, bool with_grad = true);

struct TrainResult {
    Encoder encoder;
    AdamState optimizer;
    std::vector<TrainLogRecord> log;
    std::vector<int> trained_levels;
    bool aborted = false;
    std::string abort_reason;
};

// Level curriculum h = 1..min(h_max, depth). Every batch draws its level from
// the replay scheduler and is scored with the margin of that level. Only head
// parameters change. Each step's randomness is derived from (seed, step), so
// the log is a pure function of the inputs.
TrainResult train(const Dataset& data, const PoolMap& pools, Encoder encoder,
                  const TrainConfig& config);

// Pools the trainer should see under a config: descendant or owned-only,
// with probe_val images removed.
PoolMap training_pools(const Dataset& data, PoolMode mode);

void write_train_log(const std::vector<TrainLogRecord>& log, std::ostream& out);

}  // namespace hcl
