#include "hcl/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "hcl/error.hpp"

namespace hcl {

double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double alpha) {
    if (a.size() != p.size() || a.size() != n.size())
        throw std::invalid_argument("triplet_loss: embedding dimensions differ");
    if (!(alpha > 0.0)) throw std::invalid_argument("triplet_loss: margin must be positive");
    double d_ap = 0.0, d_an = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!std::isfinite(a[k]) || !std::isfinite(p[k]) || !std::isfinite(n[k]))
            throw NumericError("triplet_loss: non-finite embedding");
        const double u = a[k] - p[k];
        const double v = a[k] - n[k];
        d_ap += u * u;
        d_an += v * v;
    }
    return std::max(0.0, d_ap - d_an + alpha);
}

double MarginSchedule::operator()(int h) const {
    if (h < 1 || h > h_max)
        throw std::out_of_range("margin: level " + std::to_string(h) + " outside [1, " +
                                std::to_string(h_max) + "]");
    const double gap = static_cast<double>(h_max - h);
    return gap * gap + alpha_min;
}

TripletSampler::TripletSampler(const ConceptTree& tree, const PoolMap& pools, int retry_budget)
    : retry_budget_(retry_budget) {
    if (retry_budget < 1) throw std::invalid_argument("retry budget must be >= 1");
    std::unordered_map<ImageId, std::uint32_t> interned;
    std::unordered_map<NodeId, std::size_t> node_index;
    for (const auto& [id, node] : tree.nodes()) {
        node_index.emplace(id, node_ids_.size());
        node_ids_.push_back(id);
        std::vector<std::uint32_t> pool;
        auto it = pools.find(id);
        if (it != pools.end())
            for (const auto& img : it->second) {
                auto [pos, inserted] =
                    interned.emplace(img, static_cast<std::uint32_t>(images_.size()));
                if (inserted) images_.push_back(img);
                pool.push_back(pos->second);
            }
        pools_.push_back(std::move(pool));
    }
    by_level_.resize(static_cast<std::size_t>(tree.depth()) + 1);
    for (const auto& [id, node] : tree.nodes()) {
        if (node.level < 1) continue;
        const std::size_t self = node_index.at(id);
        if (pools_[self].size() < 2) continue;
        Candidate c{self, {}};
        for (const auto& sib : tree.siblings(id)) {
            const std::size_t s = node_index.at(sib);
            if (!pools_[s].empty()) c.negatives.push_back(s);
        }
        if (c.negatives.empty()) continue;
        by_level_[static_cast<std::size_t>(node.level)].push_back(std::move(c));
    }
}

std::vector<NodeId> TripletSampler::eligible_nodes(int level) const {
    std::vector<NodeId> out;
    if (level < 1 || level >= static_cast<int>(by_level_.size())) return out;
    for (const auto& c : by_level_[static_cast<std::size_t>(level)]) out.push_back(node_ids_[c.node]);
    return out;
}

bool TripletSampler::level_trainable(int level) const {
    return level >= 1 && level < static_cast<int>(by_level_.size()) &&
           !by_level_[static_cast<std::size_t>(level)].empty();
}

Triplet TripletSampler::sample(int level, Rng& rng) const {
    if (!level_trainable(level))
        throw SchedulingError(level, "level " + std::to_string(level) +
                                         " has no eligible anchor node (only children or pools "
                                         "smaller than two); skip it");
    const auto& candidates = by_level_[static_cast<std::size_t>(level)];
    const Candidate& c = candidates[uniform_index(rng, candidates.size())];
    const auto& pool = pools_[c.node];
    for (int attempt = 0; attempt < retry_budget_; ++attempt) {
        const std::size_t i = uniform_index(rng, pool.size());
        std::size_t j = uniform_index(rng, pool.size() - 1);
        if (j >= i) ++j;
        const std::size_t neg_node = c.negatives[uniform_index(rng, c.negatives.size())];
        const auto& neg_pool = pools_[neg_node];
        const std::uint32_t neg = neg_pool[uniform_index(rng, neg_pool.size())];
        if (neg == pool[i] || neg == pool[j]) continue;
        return {images_[pool[i]], images_[pool[j]], images_[neg], level, node_ids_[c.node],
                node_ids_[neg_node]};
    }
    throw RetryExhausted(node_ids_[c.node],
                         "no valid triplet for anchor node " + node_ids_[c.node] + " after " +
                             std::to_string(retry_budget_) +
                             " attempts; its sibling pools overlap its own too heavily");
}

Triplet sample_triplet(const ConceptTree& tree, const PoolMap& pools, int level, Rng& rng) {
    return TripletSampler(tree, pools).sample(level, rng);
}

int next_batch_level(double r_p, int current_level, Rng& rng) {
    if (current_level <= 1) return 1;
    if (uniform01(rng) < r_p)
        return 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(current_level - 1)));
    return current_level;
}

ReplayScheduler::ReplayScheduler(double r_p, std::uint64_t seed) : r_p_(r_p), rng_(splitmix64(seed)) {
    if (!(r_p >= 0.0 && r_p <= 1.0)) throw ConfigError("r_p must be in [0, 1]");
}

void ReplayScheduler::set_current_level(int level) {
    if (level < 1) throw std::invalid_argument("current level must be >= 1");
    current_ = level;
}

int ReplayScheduler::next() { return next_batch_level(r_p_, current_, rng_); }

void TrainConfig::validate() const {
    if (h_max < 1) throw ConfigError("h_max must be >= 1");
    if (!(alpha_min > 0.0)) throw ConfigError("alpha_min must be positive");
    if (!(r_p >= 0.0 && r_p <= 1.0)) throw ConfigError("r_p must be in [0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (triplet_batch_size < 1) throw ConfigError("triplet_batch_size must be >= 1");
    if (steps_per_level < 0) throw ConfigError("steps_per_level must be >= 0");
    if (retry_budget < 1) throw ConfigError("retry_budget must be >= 1");
}

nlohmann::json TrainLogRecord::to_json() const {
    nlohmann::json j{{"step", step}, {"level", level}, {"alpha", alpha}, {"loss", loss},
                     {"replay", replay}};
    if (skipped || aborted) {
        j[skipped ? "skipped" : "aborted"] = true;
        j["current_level"] = current_level;
        j["note"] = note;
        j.erase("loss");
        j.erase("alpha");
    }
    return j;
}

BatchLoss triplet_batch_loss(const Encoder& encoder, const Matrix& features,
                             std::span<const double> margins, bool with_grad) {
    const std::size_t t = margins.size();
    if (features.rows() != 3 * t)
        throw std::invalid_argument("triplet batch needs three feature rows per margin");
    const auto acts = encoder.forward_head(features);
    const Matrix& e = acts.out;
    Matrix grad(e.rows(), e.cols());
    const double scale = 1.0 / static_cast<double>(t);
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        auto a = e.row(3 * i), p = e.row(3 * i + 1), n = e.row(3 * i + 2);
        const double l = triplet_loss(a, p, n, margins[i]);
        total += l;
        if (!with_grad || !(l > 0.0)) continue;
        auto ga = grad.row(3 * i), gp = grad.row(3 * i + 1), gn = grad.row(3 * i + 2);
        for (std::size_t k = 0; k < a.size(); ++k) {
            ga[k] = 2.0 * (n[k] - p[k]) * scale;
            gp[k] = -2.0 * (a[k] - p[k]) * scale;
            gn[k] = 2.0 * (a[k] - n[k]) * scale;
        }
    }
    BatchLoss out;
    out.loss = total * scale;
    if (with_grad) out.grads = encoder.grad_head(acts, grad);
    return out;
}

PoolMap training_pools(const Dataset& data, PoolMode mode) {
    PoolMap pools = mode == PoolMode::descendant ? build_pools(data.tree) : owned_only_pools(data.tree);
    return pretraining_pools(pools, data);
}

namespace {
constexpr std::uint64_t kLevelStream = 0;
}

TrainResult train(const Dataset& data, const PoolMap& pools, Encoder encoder,
                  const TrainConfig& config) {
    config.validate();
    check_split_hygiene(pools, data);

    TrainResult result;
    AdamConfig adam;
    adam.learning_rate = config.learning_rate;
    result.optimizer = make_head_optimizer(encoder, adam);

    const Matrix features = encoder.backbone_features(data.feature_matrix());
    const TripletSampler sampler(data.tree, pools, config.retry_budget);
    const MarginSchedule schedule{config.h_max, config.alpha_min};

    auto triplet_margin = [&](const Triplet& t) {
        if (!config.adaptive_h_max) return schedule(t.level);
        const int local_max = std::min(config.h_max,
                                       data.tree.subtree_depth(data.tree.level1_ancestor(t.anchor_node)));
        return MarginSchedule{local_max, config.alpha_min}(t.level);
    };

    const int top = std::min(config.h_max, data.tree.depth());
    std::uint64_t step = 0;
    for (int current = 1; current <= top && !result.aborted; ++current) {
        if (!sampler.level_trainable(current)) {
            TrainLogRecord skip;
            skip.step = step;
            skip.level = current;
            skip.current_level = current;
            skip.skipped = true;
            skip.note = "level has no eligible anchor node";
            result.log.push_back(skip);
            continue;
        }
        result.trained_levels.push_back(current);

        for (int s = 0; s < config.steps_per_level; ++s, ++step) {
            TrainLogRecord rec;
            rec.step = step;
            rec.current_level = current;
            Rng level_rng = derive_stream(config.seed, step, kLevelStream);
            rec.level = next_batch_level(config.r_p, current, level_rng);
            rec.replay = rec.level != current;

            std::vector<Triplet> batch;
            try {
                for (int slot = 0; slot < config.triplet_batch_size; ++slot) {
                    Rng rng = derive_stream(config.seed, step, static_cast<std::uint64_t>(slot) + 1);
                    batch.push_back(sampler.sample(rec.level, rng));
                }
            } catch (const SchedulingError& e) {
                rec.skipped = true;
                rec.note = e.what();
            } catch (const RetryExhausted& e) {
                rec.skipped = true;
                rec.note = e.what();
            }
            if (rec.skipped) {
                result.log.push_back(rec);
                continue;
            }

            std::vector<std::size_t> rows;
            std::vector<double> margins;
            for (const auto& t : batch) {
                rows.push_back(data.index_of(t.anchor));
                rows.push_back(data.index_of(t.positive));
                rows.push_back(data.index_of(t.negative));
                margins.push_back(triplet_margin(t));
            }
            double mean_margin = 0.0;
            for (double m : margins) mean_margin += m;
            rec.alpha = mean_margin / static_cast<double>(margins.size());

            try {
                const BatchLoss bl = triplet_batch_loss(encoder, gather_rows(features, rows), margins);
                rec.loss = bl.loss;
                if (!std::isfinite(bl.loss))
                    throw NumericError("non-finite loss at step " + std::to_string(step));
                adam_step(result.optimizer, encoder.head(), bl.grads);
            } catch (const NumericError& e) {
                result.aborted = true;
                result.abort_reason = e.what();
                rec.aborted = true;
                rec.note = e.what();
                result.log.push_back(rec);
                break;
            }
            result.log.push_back(rec);
        }
    }
    result.encoder = std::move(encoder);
    return result;
}

void write_train_log(const std::vector<TrainLogRecord>& log, std::ostream& out) {
    for (const auto& rec : log) out << rec.to_json().dump() << '\n';
}

}  // namespace hcl
