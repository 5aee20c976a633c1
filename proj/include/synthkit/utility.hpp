// TSTR/TRTR evaluation harness: reference learners (kNN vote, batch-GD
// logistic regression), classification metrics, cross-learner utility gaps,
// permutation feature importance and rank-biased overlap.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/encoder.hpp"
#include "synthkit/tabular.hpp"

namespace synthkit {

class Learner {
public:
    virtual ~Learner() = default;
    virtual void fit(const EncodedMatrix& features, std::span<const int> labels, std::size_t n_classes,
                     std::uint64_t seed) = 0;
    // Row-major (rows x n_classes); each row sums to 1.
    virtual std::vector<double> predict_proba(const EncodedMatrix& features) const = 0;
    virtual std::string name() const = 0;
};

// Majority vote over the k nearest training rows, ties in distance broken by
// row index; probabilities are vote fractions.
class KnnLearner final : public Learner {
public:
    explicit KnnLearner(std::size_t k = 5) : k_(k) {}

    void fit(const EncodedMatrix& features, std::span<const int> labels, std::size_t n_classes,
             std::uint64_t /*seed*/) override {
        if (features.rows == 0) fail(Errc::empty_set, "knn fit on empty data");
        train_ = features;
        labels_.assign(labels.begin(), labels.end());
        n_classes_ = n_classes;
    }

    std::vector<double> predict_proba(const EncodedMatrix& features) const override {
        const std::size_t k = std::min(k_, train_.rows);
        std::vector<double> probs(features.rows * n_classes_, 0.0);
        parallel_for(features.rows, [&](std::size_t q) {
            std::vector<std::pair<double, std::size_t>> neighbors(train_.rows);
            const auto row = features.row(q);
            for (std::size_t j = 0; j < train_.rows; ++j) {
                neighbors[j] = {squared_distance(row, train_.row(j)), j};
            }
            std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(k),
                              neighbors.end());
            for (std::size_t j = 0; j < k; ++j) {
                probs[q * n_classes_ + static_cast<std::size_t>(labels_[neighbors[j].second])] += 1.0;
            }
            for (std::size_t c = 0; c < n_classes_; ++c) probs[q * n_classes_ + c] /= static_cast<double>(k);
        });
        return probs;
    }

    std::string name() const override { return "knn" + std::to_string(k_); }

private:
    std::size_t k_;
    EncodedMatrix train_;
    std::vector<int> labels_;
    std::size_t n_classes_ = 0;
};

namespace detail {

// Multinomial logistic loss and analytic gradient, weights laid out as
// n_classes x (dim + 1) with the bias in the last column. L2 penalty excludes
// the bias. Exposed so the gradient can be checked against finite differences.
inline double logistic_loss_and_gradient(std::span<const double> weights, const EncodedMatrix& features,
                                         std::span<const int> labels, std::size_t n_classes, double l2,
                                         std::span<double> gradient) {
    const std::size_t d = features.cols;
    const std::size_t stride = d + 1;
    const std::size_t n = features.rows;
    std::fill(gradient.begin(), gradient.end(), 0.0);
    double loss = 0.0;
    std::vector<double> logits(n_classes);
    for (std::size_t r = 0; r < n; ++r) {
        const auto x = features.row(r);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_classes; ++c) {
            double z = weights[c * stride + d];  // bias
            for (std::size_t j = 0; j < d; ++j) z += weights[c * stride + j] * x[j];
            logits[c] = z;
            max_logit = std::max(max_logit, z);
        }
        double denom = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) denom += std::exp(logits[c] - max_logit);
        const double log_denom = std::log(denom) + max_logit;
        loss -= (logits[static_cast<std::size_t>(labels[r])] - log_denom);
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double p = std::exp(logits[c] - log_denom);
            const double err = p - (static_cast<std::size_t>(labels[r]) == c ? 1.0 : 0.0);
            for (std::size_t j = 0; j < d; ++j) gradient[c * stride + j] += err * x[j];
            gradient[c * stride + d] += err;
        }
    }
    loss /= static_cast<double>(n);
    for (double& g : gradient) g /= static_cast<double>(n);
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
            loss += 0.5 * l2 * weights[c * stride + j] * weights[c * stride + j];
            gradient[c * stride + j] += l2 * weights[c * stride + j];
        }
    }
    return loss;
}

}  // namespace detail

class LogisticLearner final : public Learner {
public:
    explicit LogisticLearner(std::size_t epochs = 400, double learning_rate = 2.0, double l2 = 1e-4)
        : epochs_(epochs), learning_rate_(learning_rate), l2_(l2) {}

    void fit(const EncodedMatrix& features, std::span<const int> labels, std::size_t n_classes,
             std::uint64_t /*seed*/) override {
        if (features.rows == 0) fail(Errc::empty_set, "logistic fit on empty data");
        dim_ = features.cols;
        n_classes_ = n_classes;
        const std::size_t stride = dim_ + 1;
        weights_.assign(n_classes * stride, 0.0);
        std::vector<double> gradient(weights_.size(), 0.0);
        for (std::size_t epoch = 0; epoch < epochs_; ++epoch) {
            detail::logistic_loss_and_gradient(weights_, features, labels, n_classes, l2_, gradient);
            for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] -= learning_rate_ * gradient[i];
        }
    }

    std::vector<double> predict_proba(const EncodedMatrix& features) const override {
        const std::size_t stride = dim_ + 1;
        std::vector<double> probs(features.rows * n_classes_, 0.0);
        std::vector<double> logits(n_classes_);
        for (std::size_t r = 0; r < features.rows; ++r) {
            const auto x = features.row(r);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < n_classes_; ++c) {
                double z = weights_[c * stride + dim_];
                for (std::size_t j = 0; j < dim_; ++j) z += weights_[c * stride + j] * x[j];
                logits[c] = z;
                max_logit = std::max(max_logit, z);
            }
            double denom = 0.0;
            for (std::size_t c = 0; c < n_classes_; ++c) denom += std::exp(logits[c] - max_logit);
            for (std::size_t c = 0; c < n_classes_; ++c) {
                probs[r * n_classes_ + c] = std::exp(logits[c] - max_logit) / denom;
            }
        }
        return probs;
    }

    std::string name() const override { return "logistic"; }

private:
    std::size_t epochs_;
    double learning_rate_;
    double l2_;
    std::size_t dim_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<double> weights_;
};

struct LearnerSpec {
    std::string name;
    std::function<std::unique_ptr<Learner>()> make;
    std::string kind;
    std::map<std::string, double> hyperparameters;
};

inline std::vector<LearnerSpec> default_learners(std::size_t knn_k = 5) {
    return {
        {"knn" + std::to_string(knn_k),
         [knn_k] { return std::make_unique<KnnLearner>(knn_k); },
         "knn_vote",
         {{"k", static_cast<double>(knn_k)}}},
        {"logistic",
         [] { return std::make_unique<LogisticLearner>(); },
         "logistic_regression",
         {{"epochs", 400.0}, {"learning_rate", 2.0}, {"l2", 1e-4}}},
    };
}

// ---- classification metrics ------------------------------------------------

// Mann-Whitney statistic: P(score_pos > score_neg) + 1/2 P(tie), computed via
// average ranks.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        fail(Errc::dimension_mismatch, "roc_auc needs matching nonempty inputs");
    }
    std::size_t n_pos = 0;
    for (int label : labels) {
        if (label != 0 && label != 1) fail(Errc::invalid_config, "roc_auc labels must be 0/1");
        n_pos += label;
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) fail(Errc::one_class_only, "roc_auc needs both classes");
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

struct ClassificationMetrics {
    double accuracy = 0.0;
    std::optional<double> balanced_accuracy;
    double weighted_f1 = 0.0;
    std::optional<double> roc_auc;
    double log_loss = 0.0;
};

inline ClassificationMetrics evaluate_classification(std::span<const double> probs, std::span<const int> labels,
                                                     std::size_t n_classes) {
    const std::size_t n = labels.size();
    if (n == 0) fail(Errc::empty_set, "evaluation on empty test set");
    ClassificationMetrics out;

    std::vector<int> predicted(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < n_classes; ++c) {
            if (probs[r * n_classes + c] > probs[r * n_classes + best]) best = c;
        }
        predicted[r] = static_cast<int>(best);
    }

    std::vector<std::size_t> support(n_classes, 0);
    std::vector<std::size_t> true_pos(n_classes, 0);
    std::vector<std::size_t> pred_count(n_classes, 0);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto truth = static_cast<std::size_t>(labels[r]);
        const auto pred = static_cast<std::size_t>(predicted[r]);
        support[truth]++;
        pred_count[pred]++;
        if (truth == pred) {
            true_pos[truth]++;
            ++correct;
        }
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    std::size_t present = 0;
    double recall_sum = 0.0;
    double weighted_f1 = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (support[c] == 0) continue;
        ++present;
        const double recall = static_cast<double>(true_pos[c]) / static_cast<double>(support[c]);
        recall_sum += recall;
        const double precision =
            pred_count[c] == 0 ? 0.0 : static_cast<double>(true_pos[c]) / static_cast<double>(pred_count[c]);
        const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        weighted_f1 += f1 * static_cast<double>(support[c]) / static_cast<double>(n);
    }
    out.weighted_f1 = weighted_f1;
    if (present >= 2) out.balanced_accuracy = recall_sum / static_cast<double>(present);

    if (n_classes == 2 && present == 2) {
        std::vector<double> scores(n);
        for (std::size_t r = 0; r < n; ++r) scores[r] = probs[r * 2 + 1];
        out.roc_auc = roc_auc(scores, labels);
    }

    double ll = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double p = std::clamp(probs[r * n_classes + static_cast<std::size_t>(labels[r])], 1e-15, 1.0 - 1e-15);
        ll -= std::log(p);
    }
    out.log_loss = ll / static_cast<double>(n);
    return out;
}

// ---- TSTR / TRTR harness ---------------------------------------------------

struct ClassSpace {
    std::vector<std::string> classes;
    std::map<std::string, int> index;

    int id(const std::string& label) const {
        auto it = index.find(label);
        if (it == index.end()) fail(Errc::schema_mismatch, "label outside class space: " + label);
        return it->second;
    }
};

inline ClassSpace build_class_space(std::initializer_list<const Table*> tables, const std::string& target) {
    ClassSpace space;
    for (const Table* t : tables) {
        const auto& col = t->categorical(target);
        for (std::int32_t code : col.codes) {
            const auto& label = col.levels[static_cast<std::size_t>(code)];
            if (space.index.emplace(label, static_cast<int>(space.classes.size())).second) {
                space.classes.push_back(label);
            }
        }
    }
    return space;
}

inline std::vector<int> encode_labels(const Table& t, const std::string& target, const ClassSpace& space) {
    const auto& col = t.categorical(target);
    std::vector<int> out(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) out[r] = space.id(col.label(r));
    return out;
}

inline std::string find_target_column(const TableSchema& schema) {
    for (const auto& col : schema.columns()) {
        if (col.role == ColumnRole::target) {
            if (col.kind != ColumnKind::categorical) {
                fail(Errc::column_kind_mismatch, "target column must be categorical: " + col.name);
            }
            return col.name;
        }
    }
    fail(Errc::missing_target, "schema declares no target column");
}

struct ProtocolCell {
    std::string learner;
    std::string protocol;  // "trtr" | "tstr"
    ClassificationMetrics metrics;
};

struct UtilityScores {
    std::vector<ProtocolCell> cells;
    std::map<std::string, std::optional<double>> mean_trtr;
    std::map<std::string, std::optional<double>> mean_tstr;
    std::map<std::string, std::optional<double>> gap;  // |mean_trtr - mean_tstr|
};

namespace detail {

inline std::map<std::string, std::optional<double>> metric_map(const ClassificationMetrics& m) {
    return {
        {"accuracy", m.accuracy},
        {"balanced_accuracy", m.balanced_accuracy},
        {"weighted_f1", m.weighted_f1},
        {"roc_auc", m.roc_auc},
        {"log_loss", m.log_loss},
    };
}

inline std::map<std::string, std::optional<double>> mean_over(
    const std::vector<std::map<std::string, std::optional<double>>>& maps) {
    std::map<std::string, std::optional<double>> out;
    if (maps.empty()) return out;
    for (const auto& [key, _] : maps.front()) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& m : maps) {
            if (const auto& v = m.at(key)) {
                sum += *v;
                ++count;
            }
        }
        out[key] = count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt;
    }
    return out;
}

inline std::size_t distinct_labels(std::span<const int> labels) {
    std::set<int> seen(labels.begin(), labels.end());
    return seen.size();
}

}  // namespace detail

// Trains each learner on real_train (TRTR) and synth_train (TSTR), evaluates
// both on real_test, and reports cross-learner means plus per-metric gaps.
// Features are HEOM-encoded with an encoder fit on real_train only.
inline UtilityScores tstr_trtr(const Table& real_train, const Table& real_test, const Table& synth_train,
                               const std::vector<LearnerSpec>& learners, std::uint64_t seed) {
    if (real_test.rows() == 0) fail(Errc::empty_set, "empty real test set");
    const std::string target = find_target_column(real_train.schema());
    synth_train.categorical(target);
    real_test.categorical(target);

    const ClassSpace space = build_class_space({&real_train, &synth_train, &real_test}, target);
    const auto y_real = encode_labels(real_train, target, space);
    const auto y_synth = encode_labels(synth_train, target, space);
    const auto y_test = encode_labels(real_test, target, space);
    if (detail::distinct_labels(y_real) < 2 || detail::distinct_labels(y_synth) < 2) {
        fail(Errc::single_class_training, "training labels are single-class");
    }

    const Table real_features = real_train.drop_column(target);
    const HeomEncoder encoder = HeomEncoder::fit(real_features);
    const EncodedMatrix x_real = encoder.encode(real_features);
    const EncodedMatrix x_synth = encoder.encode(synth_train.drop_column(target));
    const EncodedMatrix x_test = encoder.encode(real_test.drop_column(target));

    UtilityScores out;
    std::vector<std::map<std::string, std::optional<double>>> trtr_maps, tstr_maps;
    for (std::size_t i = 0; i < learners.size(); ++i) {
        auto model_trtr = learners[i].make();
        model_trtr->fit(x_real, y_real, space.classes.size(), derive_seed(seed, 2 * i));
        const auto probs_trtr = model_trtr->predict_proba(x_test);
        const auto metrics_trtr = evaluate_classification(probs_trtr, y_test, space.classes.size());
        out.cells.push_back({learners[i].name, "trtr", metrics_trtr});
        trtr_maps.push_back(detail::metric_map(metrics_trtr));

        auto model_tstr = learners[i].make();
        model_tstr->fit(x_synth, y_synth, space.classes.size(), derive_seed(seed, 2 * i));
        const auto probs_tstr = model_tstr->predict_proba(x_test);
        const auto metrics_tstr = evaluate_classification(probs_tstr, y_test, space.classes.size());
        out.cells.push_back({learners[i].name, "tstr", metrics_tstr});
        tstr_maps.push_back(detail::metric_map(metrics_tstr));
    }
    out.mean_trtr = detail::mean_over(trtr_maps);
    out.mean_tstr = detail::mean_over(tstr_maps);
    for (const auto& [key, trtr] : out.mean_trtr) {
        const auto& tstr = out.mean_tstr.at(key);
        out.gap[key] = (trtr && tstr) ? std::optional<double>(std::abs(*trtr - *tstr)) : std::nullopt;
    }
    return out;
}

// ---- permutation feature importance -----------------------------------------

enum class UtilityMetric { accuracy, balanced_accuracy, weighted_f1, roc_auc };

inline const char* to_string(UtilityMetric m) {
    switch (m) {
        case UtilityMetric::accuracy: return "accuracy";
        case UtilityMetric::balanced_accuracy: return "balanced_accuracy";
        case UtilityMetric::weighted_f1: return "weighted_f1";
        case UtilityMetric::roc_auc: return "roc_auc";
    }
    return "accuracy";
}

inline std::optional<double> metric_value(const ClassificationMetrics& m, UtilityMetric which) {
    switch (which) {
        case UtilityMetric::accuracy: return m.accuracy;
        case UtilityMetric::balanced_accuracy: return m.balanced_accuracy;
        case UtilityMetric::weighted_f1: return m.weighted_f1;
        case UtilityMetric::roc_auc: return m.roc_auc;
    }
    return std::nullopt;
}

inline Table permute_column(const Table& t, const std::string& column, const std::vector<std::size_t>& perm) {
    std::vector<std::vector<double>> numeric;
    std::vector<CategoricalColumn> categorical;
    for (const auto& spec : t.schema().columns()) {
        if (spec.kind == ColumnKind::numeric) {
            auto values = t.numeric(spec.name);
            if (spec.name == column) {
                std::vector<double> permuted(values.size());
                for (std::size_t r = 0; r < values.size(); ++r) permuted[r] = values[perm[r]];
                values = std::move(permuted);
            }
            numeric.push_back(std::move(values));
        } else {
            auto col = t.categorical(spec.name);
            if (spec.name == column) {
                std::vector<std::int32_t> permuted(col.codes.size());
                for (std::size_t r = 0; r < col.codes.size(); ++r) permuted[r] = col.codes[perm[r]];
                col.codes = std::move(permuted);
            }
            categorical.push_back(std::move(col));
        }
    }
    return Table(t.schema(), std::move(numeric), std::move(categorical));
}

struct ImportanceRanking {
    std::vector<std::string> ranked_features;  // descending score
    std::map<std::string, double> scores;
};

// Average metric drop over `permutations` independent non-identity shuffles of
// each feature column (labels fixed). Ranking ties break by feature order.
inline ImportanceRanking permutation_importance(const Learner& model, const HeomEncoder& encoder,
                                                const Table& test, const std::string& target,
                                                const ClassSpace& space, UtilityMetric metric,
                                                std::size_t permutations, std::uint64_t seed) {
    if (permutations == 0) fail(Errc::invalid_config, "permutation count must be >= 1");
    const auto y_test = encode_labels(test, target, space);
    const Table features = test.drop_column(target);
    const auto baseline_probs = model.predict_proba(encoder.encode(features));
    const auto baseline = metric_value(evaluate_classification(baseline_probs, y_test, space.classes.size()), metric);
    if (!baseline) fail(Errc::one_class_only, "pfi metric undefined on this test set");

    std::vector<std::string> feature_names;
    for (const auto& spec : features.schema().columns()) feature_names.push_back(spec.name);

    ImportanceRanking out;
    const std::size_t n = test.rows();
    for (std::size_t f = 0; f < feature_names.size(); ++f) {
        Rng rng(derive_seed(seed, f));
        double drop_sum = 0.0;
        for (std::size_t p = 0; p < permutations; ++p) {
            auto perm = rng.permutation(n);
            if (n > 1) {
                bool identity = true;
                while (identity) {
                    identity = true;
                    for (std::size_t r = 0; r < n; ++r) {
                        if (perm[r] != r) {
                            identity = false;
                            break;
                        }
                    }
                    if (identity) perm = rng.permutation(n);
                }
            }
            const Table permuted = permute_column(features, feature_names[f], perm);
            const auto probs = model.predict_proba(encoder.encode(permuted));
            const auto value =
                metric_value(evaluate_classification(probs, y_test, space.classes.size()), metric);
            drop_sum += *baseline - value.value_or(*baseline);
        }
        out.scores[feature_names[f]] = drop_sum / static_cast<double>(permutations);
    }

    std::vector<std::size_t> order(feature_names.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = out.scores.at(feature_names[a]);
        const double sb = out.scores.at(feature_names[b]);
        if (sa != sb) return sa > sb;
        return a < b;
    });
    for (std::size_t i : order) out.ranked_features.push_back(feature_names[i]);
    return out;
}

// ---- rank-biased overlap -----------------------------------------------------

struct RboResult {
    double normalized = 0.0;  // identical lists score exactly 1
    double raw = 0.0;         // truncated sum without normalization
};

inline RboResult rbo(const std::vector<std::string>& list_a, const std::vector<std::string>& list_b, double p) {
    if (!(p > 0.0 && p < 1.0)) fail(Errc::invalid_config, "rbo persistence must be in (0,1)");
    const std::set<std::string> set_a(list_a.begin(), list_a.end());
    const std::set<std::string> set_b(list_b.begin(), list_b.end());
    if (set_a.size() != list_a.size() || set_b.size() != list_b.size()) {
        fail(Errc::duplicate_items, "rbo lists must not contain duplicates");
    }
    if (set_a != set_b) fail(Errc::mismatched_universe, "rbo lists must rank the same items");
    const std::size_t d_max = list_a.size();
    if (d_max == 0) fail(Errc::empty_set, "rbo on empty lists");

    std::set<std::string> seen_a, seen_b;
    std::size_t overlap = 0;
    double raw = 0.0;
    double weight = 1.0;  // p^(d-1)
    for (std::size_t d = 1; d <= d_max; ++d) {
        const auto& a = list_a[d - 1];
        const auto& b = list_b[d - 1];
        if (a == b) {
            ++overlap;
        } else {
            if (seen_b.erase(a)) ++overlap;
            else seen_a.insert(a);
            if (seen_a.erase(b)) ++overlap;
            else seen_b.insert(b);
        }
        const double agreement = static_cast<double>(overlap) / static_cast<double>(d);
        raw += weight * agreement;
        weight *= p;
    }
    RboResult out;
    out.raw = (1.0 - p) * raw;
    out.normalized = out.raw / (1.0 - std::pow(p, static_cast<double>(d_max)));
    return out;
}

}  // namespace synthkit
