#include "hcl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "hcl/adam.hpp"
#include "hcl/error.hpp"
#include "hcl/kernels.hpp"
#include "hcl/rng.hpp"

namespace hcl {

void ProbeConfig::validate() const {
    if (batch_size < 1) throw ConfigError("probe batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("probe epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("probe learning_rate must be positive");
}

Matrix SoftmaxProbe::probabilities(const Matrix& embeddings) const {
    Matrix logits = kernels::matmul(embeddings, weights);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        double mx = -INFINITY;
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] += bias(0, c);
            mx = std::max(mx, row[c]);
        }
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    return logits;
}

SoftmaxProbe train_probe(const Matrix& embeddings, std::span<const int> labels, int num_classes,
                         const ProbeConfig& config) {
    config.validate();
    if (labels.size() != embeddings.rows())
        throw std::invalid_argument("train_probe: one label per embedding row required");
    if (num_classes < 1) throw std::invalid_argument("train_probe: need at least one class");
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int l : labels) {
        if (l < 0 || l >= num_classes) throw DataError("probe label out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    std::string missing;
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
    if (!missing.empty()) throw DataError("classes absent from probe_train: " + missing);

    const std::size_t d = embeddings.cols(), C = static_cast<std::size_t>(num_classes);
    SoftmaxProbe probe{Matrix(d, C), Matrix(1, C)};
    AdamConfig adam;
    adam.learning_rate = config.learning_rate;
    AdamState opt(adam, {d * C, C});

    std::vector<std::size_t> order(labels.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = derive_stream(config.seed, static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
            const Matrix x = gather_rows(embeddings, idx);
            Matrix g = probe.probabilities(x);  // becomes dLoss/dlogits
            const double inv = 1.0 / static_cast<double>(idx.size());
            for (std::size_t r = 0; r < idx.size(); ++r) {
                g(r, static_cast<std::size_t>(labels[idx[r]])) -= 1.0;
                for (double& v : g.row(r)) v *= inv;
            }
            Matrix gw = kernels::matmul_tn(x, g);
            Matrix gb(1, C);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < C; ++c) gb(0, c) += g(r, c);
            const std::array<ParamBlock, 2> params{{{"weights", probe.weights.flat()}, {"bias", probe.bias.flat()}}};
            const std::array<ConstParamBlock, 2> grads{{{"weights", gw.flat()}, {"bias", gb.flat()}}};
            opt.step(params, grads);
        }
    }
    return probe;
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const bool> relevant) {
    if (scores.size() != relevant.size())
        throw std::invalid_argument("average_precision: scores and relevance differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double hits = 0.0, sum = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (!relevant[order[k]]) continue;
        hits += 1.0;
        sum += hits / static_cast<double>(k + 1);
    }
    if (hits == 0.0) return std::nullopt;
    return sum / hits;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace

ProbeReport evaluate_scores(const Matrix& scores, std::span<const int> labels,
                            const std::vector<std::string>& class_names, MapStarMode mode,
                            std::string model_name) {
    const std::size_t n = scores.rows(), C = scores.cols();
    if (labels.size() != n) throw std::invalid_argument("evaluate_scores: label count mismatch");
    if (class_names.size() != C) throw std::invalid_argument("evaluate_scores: class name count mismatch");

    ProbeReport rep;
    rep.model_name = std::move(model_name);
    rep.class_names = class_names;
    rep.n_val = n;
    rep.class_counts.assign(C, 0);
    for (int l : labels) ++rep.class_counts.at(static_cast<std::size_t>(l));

    std::vector<double> column(n);
    std::unique_ptr<bool[]> rel(new bool[n]);
    double ap_sum = 0.0, weighted = 0.0;
    std::size_t defined = 0, weight_total = 0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = scores(i, c);
            rel[i] = labels[i] == static_cast<int>(c);
        }
        auto ap = average_precision(column, std::span<const bool>(rel.get(), n));
        rep.per_class_ap.push_back(ap);
        if (ap) {
            ap_sum += *ap;
            ++defined;
            weighted += *ap * static_cast<double>(rep.class_counts[c]);
            weight_total += rep.class_counts[c];
        }
    }
    rep.mAP = defined ? ap_sum / static_cast<double>(defined) : 0.0;
    rep.mAP_star_class_weighted = weight_total ? weighted / static_cast<double>(weight_total) : 0.0;

    // micro AP: every (sample, class) score in one ranking, relevant when the
    // class is the sample's label, so each sample contributes one positive
    std::vector<double> all_scores(scores.flat().begin(), scores.flat().end());
    std::unique_ptr<bool[]> all_rel(new bool[n * C]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < C; ++c) all_rel[i * C + c] = labels[i] == static_cast<int>(c);
    rep.mAP_star_pooled =
        average_precision(all_scores, std::span<const bool>(all_rel.get(), n * C)).value_or(0.0);
    rep.mAP_star = mode == MapStarMode::pooled ? rep.mAP_star_pooled : rep.mAP_star_class_weighted;

    std::vector<std::size_t> predicted_count(C, 0), correct_count(C, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = scores.row(i);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        ++predicted_count[best];
        if (static_cast<int>(best) == labels[i]) {
            ++correct;
            ++correct_count[best];
        }
    }
    rep.accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    for (std::size_t c = 0; c < C; ++c)
        rep.per_class_precision.push_back(
            predicted_count[c] ? std::optional<double>(static_cast<double>(correct_count[c]) /
                                                       static_cast<double>(predicted_count[c]))
                               : std::nullopt);
    return rep;
}

nlohmann::json ProbeReport::to_json() const {
    nlohmann::json per_class = nlohmann::json::object();
    nlohmann::json precision = nlohmann::json::object();
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        per_class[class_names[c]] = optional_json(per_class_ap[c]);
        precision[class_names[c]] = optional_json(per_class_precision[c]);
        counts[class_names[c]] = class_counts[c];
    }
    return {{"model_name", model_name},
            {"mAP", mAP},
            {"mAP_star", mAP_star},
            {"mAP_star_pooled", mAP_star_pooled},
            {"mAP_star_class_weighted", mAP_star_class_weighted},
            {"per_class", per_class},
            {"classes", class_names},
            {"top1_precision", precision},
            {"accuracy", accuracy},
            {"n_val", n_val},
            {"class_counts", counts}};
}

ProbeReport ProbeReport::from_json(const nlohmann::json& j) {
    ProbeReport r;
    try {
        r.model_name = j.value("model_name", "");
        r.mAP = j.at("mAP").get<double>();
        r.mAP_star = j.at("mAP_star").get<double>();
        r.mAP_star_pooled = j.value("mAP_star_pooled", r.mAP_star);
        r.mAP_star_class_weighted = j.value("mAP_star_class_weighted", 0.0);
        r.accuracy = j.value("accuracy", 0.0);
        r.n_val = j.value("n_val", std::size_t{0});
        const auto& per_class = j.at("per_class");
        if (j.contains("classes")) {
            r.class_names = j.at("classes").get<std::vector<std::string>>();
        } else {
            for (const auto& [name, v] : per_class.items()) r.class_names.push_back(name);
        }
        for (const auto& name : r.class_names) {
            r.per_class_ap.push_back(optional_from(per_class.at(name)));
            r.per_class_precision.push_back(
                j.contains("top1_precision") ? optional_from(j.at("top1_precision").at(name)) : std::nullopt);
            r.class_counts.push_back(j.contains("class_counts") ? j.at("class_counts").at(name).get<std::size_t>() : 0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed probe report: ") + e.what());
    }
    return r;
}

ProbeReport run_probe(const Encoder& encoder, const Dataset& data, const ProbeConfig& config,
                      std::string model_name) {
    const Matrix backbone_before = encoder.backbone();
    const HeadParams head_before = encoder.head();

    std::vector<std::size_t> train_rows, val_rows;
    std::vector<int> train_labels, val_labels;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& r = data.records[i];
        if (!r.label) continue;
        if (r.split == Split::probe_train) {
            train_rows.push_back(i);
            train_labels.push_back(*r.label);
        } else if (r.split == Split::probe_val) {
            val_rows.push_back(i);
            val_labels.push_back(*r.label);
        }
    }
    if (val_rows.empty()) throw DataError("dataset has no labelled probe_val images");
    const Matrix x = data.feature_matrix();
    const Matrix train_emb = encoder.encode(gather_rows(x, train_rows));
    const Matrix val_emb = encoder.encode(gather_rows(x, val_rows));
    const auto C = static_cast<int>(data.class_names.size());
    const SoftmaxProbe probe = train_probe(train_emb, train_labels, C, config);
    auto report = evaluate_scores(probe.probabilities(val_emb), val_labels, data.class_names,
                                  config.map_star, std::move(model_name));

    if (!(encoder.backbone() == backbone_before) || !(encoder.head() == head_before))
        throw std::logic_error("encoder changed during probe training");
    return report;
}

}  // namespace hcl
