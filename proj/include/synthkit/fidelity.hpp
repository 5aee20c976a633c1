// Univariate and bivariate resemblance metrics: Jensen-Shannon distance with
// per-level breakdowns, Cohen's d, quantile/tail heuristics, and the three
// dependence-matrix families (Pearson rho, Cramer's V, correlation ratio eta^2)
// summarized by Frobenius distance and Spearman rank agreement.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/tabular.hpp"

namespace synthkit {

struct LevelComparison {
    std::string label;
    double p_real = 0.0;
    double p_synth = 0.0;
    std::optional<double> log2fc;  // undefined when p_real == 0
    double js_contrib = 0.0;       // bits
};

struct CategoricalComparison {
    std::string column;
    std::vector<LevelComparison> levels;
    double js_divergence_bits = 0.0;
    double js_distance = 0.0;  // sqrt of the bit-valued divergence, capped at 1
};

namespace detail {

inline std::map<std::string, double> level_frequencies(const CategoricalColumn& col) {
    std::map<std::string, double> freq;
    const double n = static_cast<double>(col.codes.size());
    for (std::int32_t code : col.codes) freq[col.levels[static_cast<std::size_t>(code)]] += 1.0;
    for (auto& [label, count] : freq) count /= n;
    return freq;
}

inline double xlog2x_over(double p, double m) {
    if (p <= 0.0) return 0.0;  // 0 * log(0/.) := 0
    return p * std::log2(p / m);
}

}  // namespace detail

inline CategoricalComparison js_categorical(const Table& real, const Table& synth, const std::string& column) {
    const auto& real_col = real.categorical(column);
    const auto& synth_col = synth.categorical(column);
    const auto p_real = detail::level_frequencies(real_col);
    const auto p_synth = detail::level_frequencies(synth_col);

    // Union support ordered as: real dictionary order, then synthetic-only
    // labels in synthetic dictionary order.
    std::vector<std::string> labels;
    for (const auto& label : real_col.levels) {
        if (p_real.count(label)) labels.push_back(label);
    }
    for (const auto& label : synth_col.levels) {
        if (p_synth.count(label) && !p_real.count(label)) labels.push_back(label);
    }

    CategoricalComparison out;
    out.column = column;
    for (const auto& label : labels) {
        LevelComparison level;
        level.label = label;
        auto it_r = p_real.find(label);
        auto it_s = p_synth.find(label);
        level.p_real = it_r == p_real.end() ? 0.0 : it_r->second;
        level.p_synth = it_s == p_synth.end() ? 0.0 : it_s->second;
        const double mid = 0.5 * (level.p_real + level.p_synth);
        level.js_contrib =
            0.5 * detail::xlog2x_over(level.p_real, mid) + 0.5 * detail::xlog2x_over(level.p_synth, mid);
        if (level.p_real > 0.0) {
            level.log2fc = level.p_synth > 0.0 ? std::log2(level.p_synth / level.p_real)
                                               : -std::numeric_limits<double>::infinity();
        }
        out.js_divergence_bits += level.js_contrib;
        out.levels.push_back(std::move(level));
    }
    if (out.js_divergence_bits < 0.0) out.js_divergence_bits = 0.0;  // guard rounding
    out.js_distance = std::min(1.0, std::sqrt(out.js_divergence_bits));
    return out;
}

// Sum of per-column divergences (bits) over the shared categorical columns.
inline double total_categorical_js(const Table& real, const Table& synth) {
    double total = 0.0;
    for (const auto& name : real.categorical_names()) {
        total += js_categorical(real, synth, name).js_divergence_bits;
    }
    return total;
}

// |mu_S - mu_R| / s_p with the (n-1)-denominator pooled standard deviation.
inline double cohens_d(std::span<const double> real, std::span<const double> synth) {
    if (real.size() < 2 || synth.size() < 2) fail(Errc::too_few_rows, "cohens_d needs >= 2 values per side");
    const double mu_r = mean_of(real);
    const double mu_s = mean_of(synth);
    const double var_r = sample_variance(real);
    const double var_s = sample_variance(synth);
    const double nr = static_cast<double>(real.size());
    const double ns = static_cast<double>(synth.size());
    const double pooled = std::sqrt(((nr - 1.0) * var_r + (ns - 1.0) * var_s) / (nr + ns - 2.0));
    const double diff = std::abs(mu_s - mu_r);
    if (pooled <= 0.0) {
        if (diff == 0.0) return 0.0;  // both constant at the same value
        fail(Errc::zero_pooled_std, "both columns constant with different means");
    }
    return diff / pooled;
}

inline double cohens_d(const Table& real, const Table& synth, const std::string& column) {
    return cohens_d(real.numeric(column), synth.numeric(column));
}

struct QuantileComparison {
    double q_low = 0.05;
    double q_high = 0.95;
    // Relative shifts; undefined when the baseline quantile is 0.
    std::optional<double> delta_med;
    std::optional<double> delta_low;
    std::optional<double> delta_high;
    // Tail mass deltas at the baseline thresholds, in percentage points.
    double delta_p_low_pp = 0.0;
    double delta_p_high_pp = 0.0;
};

inline QuantileComparison quantile_heuristics(std::span<const double> baseline, std::span<const double> variant,
                                              double q_low = 0.05, double q_high = 0.95) {
    if (baseline.empty() || variant.empty()) fail(Errc::empty_set, "quantile heuristics on empty column");
    std::vector<double> base_sorted(baseline.begin(), baseline.end());
    std::vector<double> var_sorted(variant.begin(), variant.end());
    std::sort(base_sorted.begin(), base_sorted.end());
    std::sort(var_sorted.begin(), var_sorted.end());

    QuantileComparison out;
    out.q_low = q_low;
    out.q_high = q_high;
    const double qb_low = quantile_sorted(base_sorted, q_low);
    const double qb_med = quantile_sorted(base_sorted, 0.5);
    const double qb_high = quantile_sorted(base_sorted, q_high);
    const double qv_low = quantile_sorted(var_sorted, q_low);
    const double qv_med = quantile_sorted(var_sorted, 0.5);
    const double qv_high = quantile_sorted(var_sorted, q_high);

    auto relative_shift = [](double variant_q, double baseline_q) -> std::optional<double> {
        if (baseline_q == 0.0) return std::nullopt;  // ratio indeterminate
        return variant_q / baseline_q - 1.0;
    };
    out.delta_low = relative_shift(qv_low, qb_low);
    out.delta_med = relative_shift(qv_med, qb_med);
    out.delta_high = relative_shift(qv_high, qb_high);

    auto mass_leq = [](std::span<const double> sorted, double threshold) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), threshold);
        return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    };
    auto mass_geq = [](std::span<const double> sorted, double threshold) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), threshold);
        return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
    };
    out.delta_p_low_pp = 100.0 * (mass_leq(var_sorted, qb_low) - mass_leq(base_sorted, qb_low));
    out.delta_p_high_pp = 100.0 * (mass_geq(var_sorted, qb_high) - mass_geq(base_sorted, qb_high));
    return out;
}

inline QuantileComparison quantile_heuristics(const Table& baseline, const Table& variant,
                                              const std::string& column, double q_low = 0.05,
                                              double q_high = 0.95) {
    return quantile_heuristics(baseline.numeric(column), variant.numeric(column), q_low, q_high);
}

// ---- dependence matrices -------------------------------------------------

struct PairwiseMatrix {
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;  // equal to row_names for square families
    std::vector<double> values;          // row-major
    bool square = true;

    double at(std::size_t r, std::size_t c) const { return values[r * col_names.size() + c]; }
};

struct FamilySummary {
    PairwiseMatrix real;
    PairwiseMatrix synth;
    double frobenius_diff = 0.0;
    std::optional<double> spearman;
    std::vector<std::string> degenerate_pairs;  // entries forced to 0
};

struct DependenceSummary {
    std::optional<FamilySummary> pearson;
    std::optional<FamilySummary> cramers_v;
    std::optional<FamilySummary> eta2;
};

namespace detail {

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// Cramer's V without bias correction; empty levels are dropped from the
// contingency table.
inline std::optional<double> cramers_v_pair(const CategoricalColumn& a, const CategoricalColumn& b) {
    const std::size_t n = a.codes.size();
    std::vector<std::size_t> count_a(a.levels.size(), 0);
    std::vector<std::size_t> count_b(b.levels.size(), 0);
    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> joint;
    for (std::size_t r = 0; r < n; ++r) {
        count_a[static_cast<std::size_t>(a.codes[r])]++;
        count_b[static_cast<std::size_t>(b.codes[r])]++;
        joint[{a.codes[r], b.codes[r]}]++;
    }
    const auto nonzero = [](const std::vector<std::size_t>& counts) {
        std::size_t k = 0;
        for (std::size_t c : counts) k += c > 0 ? 1 : 0;
        return k;
    };
    const std::size_t levels_a = nonzero(count_a);
    const std::size_t levels_b = nonzero(count_b);
    const std::size_t q = std::min(levels_a, levels_b);
    if (q < 2) return std::nullopt;
    double chi2 = 0.0;
    for (std::size_t ia = 0; ia < count_a.size(); ++ia) {
        if (count_a[ia] == 0) continue;
        for (std::size_t ib = 0; ib < count_b.size(); ++ib) {
            if (count_b[ib] == 0) continue;
            const double expected = static_cast<double>(count_a[ia]) * static_cast<double>(count_b[ib]) /
                                    static_cast<double>(n);
            auto it = joint.find({static_cast<std::int32_t>(ia), static_cast<std::int32_t>(ib)});
            const double observed = it == joint.end() ? 0.0 : static_cast<double>(it->second);
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
    }
    const double v2 = chi2 / (static_cast<double>(n) * static_cast<double>(q - 1));
    return std::sqrt(std::max(0.0, v2));
}

// eta^2 = SS_between / SS_total of the numeric grouped by the categorical.
inline std::optional<double> correlation_ratio(std::span<const double> numeric, const CategoricalColumn& groups) {
    const double mu = mean_of(numeric);
    double ss_total = 0.0;
    for (double v : numeric) ss_total += (v - mu) * (v - mu);
    if (ss_total <= 0.0) return std::nullopt;
    std::vector<double> group_sum(groups.levels.size(), 0.0);
    std::vector<std::size_t> group_count(groups.levels.size(), 0);
    for (std::size_t r = 0; r < numeric.size(); ++r) {
        group_sum[static_cast<std::size_t>(groups.codes[r])] += numeric[r];
        group_count[static_cast<std::size_t>(groups.codes[r])]++;
    }
    double ss_between = 0.0;
    for (std::size_t g = 0; g < group_sum.size(); ++g) {
        if (group_count[g] == 0) continue;
        const double gm = group_sum[g] / static_cast<double>(group_count[g]);
        ss_between += static_cast<double>(group_count[g]) * (gm - mu) * (gm - mu);
    }
    return ss_between / ss_total;
}

inline std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

inline std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) return std::nullopt;
    if (std::equal(a.begin(), a.end(), b.begin())) return 1.0;
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

inline std::optional<double> spearman_entries(const PairwiseMatrix& a, const PairwiseMatrix& b) {
    std::vector<double> va, vb;
    const std::size_t rows = a.row_names.size();
    const std::size_t cols = a.col_names.size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (a.square && r == c) continue;  // off-diagonal only for square families
            va.push_back(a.at(r, c));
            vb.push_back(b.at(r, c));
        }
    }
    return spearman(va, vb);
}

inline double frobenius_diff(const PairwiseMatrix& a, const PairwiseMatrix& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

}  // namespace detail

inline DependenceSummary dependence_matrices(const Table& real, const Table& synth) {
    const auto numeric_names = real.numeric_names();
    const auto categorical_names = real.categorical_names();
    for (const auto& name : numeric_names) synth.numeric(name);          // schema check
    for (const auto& name : categorical_names) synth.categorical(name);  // schema check

    DependenceSummary out;

    auto build_square = [](const std::vector<std::string>& names, auto&& entry,
                           std::vector<std::string>& degenerate, const char* family) {
        PairwiseMatrix m;
        m.row_names = names;
        m.col_names = names;
        m.square = true;
        m.values.assign(names.size() * names.size(), 0.0);
        for (std::size_t i = 0; i < names.size(); ++i) {
            m.values[i * names.size() + i] = 1.0;
            for (std::size_t j = i + 1; j < names.size(); ++j) {
                const auto value = entry(names[i], names[j]);
                double v = 0.0;
                if (value) {
                    v = *value;
                } else {
                    degenerate.push_back(std::string(family) + ":" + names[i] + "," + names[j]);
                }
                m.values[i * names.size() + j] = v;
                m.values[j * names.size() + i] = v;
            }
        }
        return m;
    };

    if (numeric_names.size() >= 2) {
        FamilySummary fam;
        fam.real = build_square(numeric_names,
                                [&](const std::string& a, const std::string& b) {
                                    return detail::pearson(real.numeric(a), real.numeric(b));
                                },
                                fam.degenerate_pairs, "real");
        fam.synth = build_square(numeric_names,
                                 [&](const std::string& a, const std::string& b) {
                                     return detail::pearson(synth.numeric(a), synth.numeric(b));
                                 },
                                 fam.degenerate_pairs, "synth");
        fam.frobenius_diff = detail::frobenius_diff(fam.real, fam.synth);
        fam.spearman = detail::spearman_entries(fam.real, fam.synth);
        out.pearson = std::move(fam);
    }

    if (categorical_names.size() >= 2) {
        FamilySummary fam;
        fam.real = build_square(categorical_names,
                                [&](const std::string& a, const std::string& b) {
                                    return detail::cramers_v_pair(real.categorical(a), real.categorical(b));
                                },
                                fam.degenerate_pairs, "real");
        fam.synth = build_square(categorical_names,
                                 [&](const std::string& a, const std::string& b) {
                                     return detail::cramers_v_pair(synth.categorical(a), synth.categorical(b));
                                 },
                                 fam.degenerate_pairs, "synth");
        fam.frobenius_diff = detail::frobenius_diff(fam.real, fam.synth);
        fam.spearman = detail::spearman_entries(fam.real, fam.synth);
        out.cramers_v = std::move(fam);
    }

    if (!numeric_names.empty() && !categorical_names.empty()) {
        auto build_rect = [&](const Table& t, std::vector<std::string>& degenerate, const char* tag) {
            PairwiseMatrix m;
            m.row_names = numeric_names;
            m.col_names = categorical_names;
            m.square = false;
            m.values.assign(numeric_names.size() * categorical_names.size(), 0.0);
            for (std::size_t r = 0; r < numeric_names.size(); ++r) {
                for (std::size_t c = 0; c < categorical_names.size(); ++c) {
                    const auto value =
                        detail::correlation_ratio(t.numeric(numeric_names[r]), t.categorical(categorical_names[c]));
                    if (value) {
                        m.values[r * categorical_names.size() + c] = *value;
                    } else {
                        degenerate.push_back(std::string(tag) + ":" + numeric_names[r] + "," +
                                             categorical_names[c]);
                    }
                }
            }
            return m;
        };
        FamilySummary fam;
        fam.real = build_rect(real, fam.degenerate_pairs, "real");
        fam.synth = build_rect(synth, fam.degenerate_pairs, "synth");
        fam.frobenius_diff = detail::frobenius_diff(fam.real, fam.synth);
        fam.spearman = detail::spearman_entries(fam.real, fam.synth);
        out.eta2 = std::move(fam);
    }

    return out;
}

}  // namespace synthkit
