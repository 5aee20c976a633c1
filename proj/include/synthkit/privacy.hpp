// Privacy proxies: DCR distributions with the relative proximity ratio, CAP,
// attribute-inference attacks (1-NN classifier / OLS regressor trained on
// synthetic data), and distinct L-diversity over quasi-identifier classes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/encoder.hpp"
#include "synthkit/neighbors.hpp"
#include "synthkit/tabular.hpp"
#include "synthkit/utility.hpp"

namespace synthkit {

struct DcrReport {
    std::vector<double> dcr_train;
    std::vector<double> dcr_test;
    double rpr = 50.0;              // 100 * sum(train) / (sum(train) + sum(test))
    double proximity_share = 50.0;  // 100 - rpr; the share of proximity mass on the train side
    std::optional<double> delta_rpr;
};

inline DcrReport dcr_rpr(const HeomEncoder& encoder, const Table& real_train, const Table& real_test,
                         const Table& synth) {
    if (real_train.rows() == 0 || real_test.rows() == 0 || synth.rows() == 0) {
        fail(Errc::empty_set, "dcr_rpr needs nonempty train/test/synthetic tables");
    }
    const EncodedMatrix x_train = encoder.encode(real_train);
    const EncodedMatrix x_test = encoder.encode(real_test);
    const EncodedMatrix x_synth = encoder.encode(synth);
    DcrReport out;
    out.dcr_train = dcr(x_train, x_synth);
    out.dcr_test = dcr(x_test, x_synth);
    double sum_train = 0.0;
    double sum_test = 0.0;
    for (double v : out.dcr_train) sum_train += v;
    for (double v : out.dcr_test) sum_test += v;
    const double total = sum_train + sum_test;
    out.rpr = total > 0.0 ? 100.0 * sum_train / total : 50.0;  // equal (zero) sums -> balanced
    out.proximity_share = 100.0 - out.rpr;
    return out;
}

struct CapEntry {
    std::string sensitive;
    double cap = 0.0;
    double protection = 1.0;  // 1 - cap
    std::size_t records = 0;
    std::size_t matched_records = 0;
};

// Mean posterior mass the synthetic table assigns to each holdout record's true
// sensitive value among synthetic rows agreeing on every quasi-identifier.
// Records with no synthetic key match contribute p_i = 0.
inline CapEntry cap(const Table& real_holdout, const Table& synth, const std::vector<std::string>& quasi_ids,
                    const std::string& sensitive) {
    if (quasi_ids.empty()) fail(Errc::invalid_config, "cap needs at least one quasi-identifier");
    if (real_holdout.kind(sensitive) != ColumnKind::categorical ||
        synth.kind(sensitive) != ColumnKind::categorical) {
        fail(Errc::non_categorical_sensitive, "cap sensitive column must be categorical: " + sensitive);
    }
    for (const auto& q : quasi_ids) {
        if (real_holdout.kind(q) != ColumnKind::categorical || synth.kind(q) != ColumnKind::categorical) {
            fail(Errc::column_kind_mismatch, "cap quasi-identifiers must be categorical (bin numerics first): " + q);
        }
    }

    auto key_of = [&](const Table& t, std::size_t row) {
        std::string key;
        for (const auto& q : quasi_ids) {
            key += t.categorical(q).label(row);
            key.push_back('\x1f');
        }
        return key;
    };

    // key -> sensitive label -> count over the synthetic table
    std::map<std::string, std::map<std::string, std::size_t>> posterior;
    for (std::size_t r = 0; r < synth.rows(); ++r) {
        posterior[key_of(synth, r)][synth.categorical(sensitive).label(r)]++;
    }

    CapEntry out;
    out.sensitive = sensitive;
    out.records = real_holdout.rows();
    double sum = 0.0;
    for (std::size_t r = 0; r < real_holdout.rows(); ++r) {
        auto it = posterior.find(key_of(real_holdout, r));
        if (it == posterior.end()) continue;  // zero-match convention: p_i = 0
        ++out.matched_records;
        std::size_t total = 0;
        for (const auto& [label, count] : it->second) total += count;
        const auto& truth = real_holdout.categorical(sensitive).label(r);
        const auto hit = it->second.find(truth);
        if (hit != it->second.end() && total > 0) {
            sum += static_cast<double>(hit->second) / static_cast<double>(total);
        }
    }
    out.cap = out.records == 0 ? 0.0 : sum / static_cast<double>(out.records);
    out.protection = 1.0 - out.cap;
    return out;
}

struct CapReport {
    std::vector<CapEntry> entries;
    std::optional<double> median_protection;
};

inline CapReport cap_report(const Table& real_holdout, const Table& synth,
                            const std::vector<std::string>& quasi_ids,
                            const std::vector<std::string>& sensitives) {
    CapReport out;
    for (const auto& s : sensitives) out.entries.push_back(cap(real_holdout, synth, quasi_ids, s));
    if (!out.entries.empty()) {
        std::vector<double> protections;
        for (const auto& e : out.entries) protections.push_back(e.protection);
        std::sort(protections.begin(), protections.end());
        out.median_protection = quantile_sorted(protections, 0.5);
    }
    return out;
}

struct AiaEntry {
    std::string target;
    std::string kind;        // "classification" | "regression"
    std::string trained_on;  // "synthetic"
    double score = 0.0;      // accuracy or R^2
    std::optional<double> rmse;
    bool degenerate = false;  // e.g. single-level target
};

// Attacker (default 1-NN in HEOM space over the quasi-identifier features) is
// trained on the synthetic table and scored by top-1 accuracy on real_eval.
inline AiaEntry aia_classification(const Table& synth, const Table& real_eval,
                                   const std::vector<std::string>& quasi_ids, const std::string& target,
                                   Learner* attacker = nullptr, std::uint64_t seed = 0) {
    if (synth.kind(target) != ColumnKind::categorical) {
        fail(Errc::missing_target, "classification attack target must be categorical: " + target);
    }
    const ClassSpace space = build_class_space({&synth, &real_eval}, target);
    const auto y_train = encode_labels(synth, target, space);
    const auto y_eval = encode_labels(real_eval, target, space);

    AiaEntry out;
    out.target = target;
    out.kind = "classification";
    out.trained_on = "synthetic";
    if (space.classes.size() < 2) {
        out.degenerate = true;
        out.score = 1.0;  // trivially correct on a single-level target
        return out;
    }

    const Table synth_features = synth.select_columns(quasi_ids);
    const Table eval_features = real_eval.select_columns(quasi_ids);
    const HeomEncoder encoder = HeomEncoder::fit(synth_features);
    const EncodedMatrix x_train = encoder.encode(synth_features);
    const EncodedMatrix x_eval = encoder.encode(eval_features);

    KnnLearner default_attacker(1);
    Learner& model = attacker ? *attacker : static_cast<Learner&>(default_attacker);
    model.fit(x_train, y_train, space.classes.size(), seed);
    const auto probs = model.predict_proba(x_eval);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < real_eval.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < space.classes.size(); ++c) {
            if (probs[r * space.classes.size() + c] > probs[r * space.classes.size() + best]) best = c;
        }
        if (static_cast<int>(best) == y_eval[r]) ++correct;
    }
    out.score = static_cast<double>(correct) / static_cast<double>(real_eval.rows());
    return out;
}

namespace detail {

// Solves (A + jitter*I) x = b in place via Gaussian elimination with partial
// pivoting. A is dense symmetric positive semi-definite here.
inline std::vector<double> solve_ridge(std::vector<double> a, std::vector<double> b, std::size_t n,
                                       double jitter) {
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += jitter;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        const double diag = a[col * n + col];
        if (diag == 0.0) fail(Errc::invalid_config, "singular normal equations");
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r * n + col] / diag;
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t c = i + 1; c < n; ++c) sum -= a[i * n + c] * x[c];
        x[i] = sum / a[i * n + i];
    }
    return x;
}

}  // namespace detail

// OLS on encoded quasi-identifiers (normal equations with 1e-8 ridge jitter),
// trained on synthetic, scored by R^2 and RMSE on real_eval. R^2 may be negative.
inline AiaEntry aia_regression(const Table& synth, const Table& real_eval,
                               const std::vector<std::string>& quasi_ids, const std::string& target) {
    if (synth.kind(target) != ColumnKind::numeric) {
        fail(Errc::missing_target, "regression attack target must be numeric: " + target);
    }
    const auto& y_eval = real_eval.numeric(target);
    const double y_mean = mean_of(y_eval);
    double ss_total = 0.0;
    for (double v : y_eval) ss_total += (v - y_mean) * (v - y_mean);
    if (ss_total <= 0.0) fail(Errc::zero_variance_target, "constant target in evaluation set: " + target);

    const Table synth_features = synth.select_columns(quasi_ids);
    const Table eval_features = real_eval.select_columns(quasi_ids);
    const HeomEncoder encoder = HeomEncoder::fit(synth_features);
    const EncodedMatrix x_train = encoder.encode(synth_features);
    const EncodedMatrix x_eval = encoder.encode(eval_features);
    const auto& y_train = synth.numeric(target);

    const std::size_t d = x_train.cols + 1;  // intercept last
    std::vector<double> xtx(d * d, 0.0);
    std::vector<double> xty(d, 0.0);
    std::vector<double> row(d, 1.0);
    for (std::size_t r = 0; r < x_train.rows; ++r) {
        const auto x = x_train.row(r);
        for (std::size_t j = 0; j < x_train.cols; ++j) row[j] = x[j];
        row[d - 1] = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) xtx[i * d + j] += row[i] * row[j];
            xty[i] += row[i] * y_train[r];
        }
    }
    const auto beta = detail::solve_ridge(std::move(xtx), std::move(xty), d, 1e-8);

    double ss_res = 0.0;
    for (std::size_t r = 0; r < x_eval.rows; ++r) {
        const auto x = x_eval.row(r);
        double pred = beta[d - 1];
        for (std::size_t j = 0; j < x_eval.cols; ++j) pred += beta[j] * x[j];
        const double err = y_eval[r] - pred;
        ss_res += err * err;
    }

    AiaEntry out;
    out.target = target;
    out.kind = "regression";
    out.trained_on = "synthetic";
    out.score = 1.0 - ss_res / ss_total;
    out.rmse = std::sqrt(ss_res / static_cast<double>(x_eval.rows));
    return out;
}

struct LDiversityEntry {
    std::string sensitive;
    std::size_t groups = 0;
    std::size_t min_distinct = 0;
    double mean_distinct = 0.0;
};

// Distinct sensitive-value counts within exact quasi-identifier equivalence
// classes; reported as (min, mean) over classes.
inline LDiversityEntry l_diversity(const Table& t, const std::vector<std::string>& quasi_ids,
                                   const std::string& sensitive) {
    if (t.kind(sensitive) != ColumnKind::categorical) {
        fail(Errc::non_categorical_sensitive, "l_diversity sensitive column must be categorical: " + sensitive);
    }
    if (quasi_ids.empty()) fail(Errc::invalid_config, "l_diversity needs at least one quasi-identifier");
    std::map<std::string, std::set<std::string>> groups;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        std::string key;
        for (const auto& q : quasi_ids) {
            if (t.kind(q) == ColumnKind::categorical) {
                key += t.categorical(q).label(r);
            } else {
                key += detail::format_double(t.numeric(q)[r]);
            }
            key.push_back('\x1f');
        }
        groups[key].insert(t.categorical(sensitive).label(r));
    }
    LDiversityEntry out;
    out.sensitive = sensitive;
    out.groups = groups.size();
    if (groups.empty()) return out;
    std::size_t min_distinct = std::numeric_limits<std::size_t>::max();
    double sum = 0.0;
    for (const auto& [key, values] : groups) {
        min_distinct = std::min(min_distinct, values.size());
        sum += static_cast<double>(values.size());
    }
    out.min_distinct = min_distinct;
    out.mean_distinct = sum / static_cast<double>(groups.size());
    return out;
}

}  // namespace synthkit
