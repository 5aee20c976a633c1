// Categorical mode-collapse detection and the iterative patch loop: clone the
// generator, freeze its lower layers, fine-tune on the slice carrying the
// missing level, and merge the tuned samples into the synthetic pool while
// evicting rows from the over-represented level. The base generator is never
// mutated.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/fidelity.hpp"
#include "synthkit/generator.hpp"
#include "synthkit/tabular.hpp"

namespace synthkit {

// column name -> real levels with zero synthetic count.
using MissingModes = std::map<std::string, std::vector<std::string>>;

inline MissingModes get_mode_collapse(const Table& real, const Table& synth) {
    MissingModes missing;
    for (const auto& column : real.categorical_names()) {
        if (auto idx = synth.schema().find(column); !idx || synth.schema().at(*idx).kind != ColumnKind::categorical) {
            fail(Errc::schema_mismatch, "synthetic table lacks categorical column " + column);
        }
        std::vector<std::string> levels;
        for (const auto& [label, counts] : crosstab(real, synth, column)) {
            if (counts.real > 0 && counts.synth == 0) levels.push_back(label);
        }
        if (!levels.empty()) missing.emplace(column, std::move(levels));
    }
    return missing;
}

struct RepairMetrics {
    std::map<std::string, double> zcr_pre;  // per categorical column
    std::size_t columns_with_zcr_pre = 0;
    double mar = 0.0;  // real mass in dropped levels, summed over columns
    std::size_t missing_pre = 0;
    std::size_t missing_post = 0;
    std::size_t patched_levels = 0;
    std::optional<double> srr;  // absent when nothing was missing
    double delta_mean_jsd = 0.0;  // post minus pre, mean per-column JS distance
};

inline RepairMetrics repair_metrics(const Table& real, const Table& synth_pre, const Table& synth_post) {
    RepairMetrics out;
    const auto categorical = real.categorical_names();
    double js_pre_sum = 0.0;
    double js_post_sum = 0.0;
    for (const auto& column : categorical) {
        const auto tab_pre = crosstab(real, synth_pre, column);
        std::size_t real_levels = 0;
        std::size_t dropped = 0;
        const double n_real = static_cast<double>(real.rows());
        for (const auto& [label, counts] : tab_pre) {
            if (counts.real == 0) continue;
            ++real_levels;
            if (counts.synth == 0) {
                ++dropped;
                out.mar += static_cast<double>(counts.real) / n_real;
            }
        }
        out.zcr_pre[column] = real_levels == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(real_levels);
        if (dropped > 0) ++out.columns_with_zcr_pre;
        out.missing_pre += dropped;
        js_pre_sum += js_categorical(real, synth_pre, column).js_distance;
        js_post_sum += js_categorical(real, synth_post, column).js_distance;
    }
    for (const auto& [column, levels] : get_mode_collapse(real, synth_post)) {
        out.missing_post += levels.size();
    }
    out.patched_levels = out.missing_pre - std::min(out.missing_pre, out.missing_post);
    if (out.missing_pre > 0) {
        out.srr = 1.0 - static_cast<double>(out.missing_post) / static_cast<double>(out.missing_pre);
    }
    if (!categorical.empty()) {
        const double k = static_cast<double>(categorical.size());
        out.delta_mean_jsd = js_post_sum / k - js_pre_sum / k;
    }
    return out;
}

struct PatchResult {
    Table synthetic;
    RepairMetrics metrics;
    bool converged = true;
    std::size_t rounds = 0;
};

namespace detail {

// Eviction order: levels by descending count on the pre-merge pool, ties by
// label sort order; within a level, first rows by index.
inline std::vector<std::size_t> eviction_rows(const Table& pool, const std::string& column, std::size_t needed) {
    const auto& col = pool.categorical(column);
    std::map<std::string, std::size_t> counts;
    for (std::int32_t code : col.codes) counts[col.levels[static_cast<std::size_t>(code)]]++;
    std::vector<std::pair<std::string, std::size_t>> ranking(counts.begin(), counts.end());
    std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::size_t> rows;
    for (const auto& [label, count] : ranking) {
        for (std::size_t r = 0; r < col.codes.size() && rows.size() < needed; ++r) {
            if (col.label(r) == label) rows.push_back(r);
        }
        if (rows.size() >= needed) break;
    }
    return rows;
}

}  // namespace detail

// Alg-style loop: each round detects missing (column, level) pairs in
// deterministic column-then-label order, fine-tunes a frozen clone per pair on
// the matching real slice (oversampled to budget_m rows when smaller), draws
// budget_m replacement rows and evicts budget_m rows of the currently dominant
// level, keeping |S| = batch throughout.
inline PatchResult patch_loop(const PatchableGenerator& gen, const Table& real, std::size_t batch,
                              std::size_t budget_m = 10, std::size_t max_rounds = 10,
                              std::uint64_t seed = 0) {
    if (real.rows() == 0) fail(Errc::empty_table, "patch loop needs real data");
    if (batch < budget_m) fail(Errc::invalid_config, "batch must be >= patch budget m");

    Table pool = gen.sample(batch, derive_seed(seed, 0));
    const Table initial = pool;

    Rng augment_rng(derive_seed(seed, 0x6175676dULL));
    std::set<std::pair<std::string, std::string>> patched;
    std::uint64_t tune_stream = 1;
    std::size_t rounds = 0;
    bool converged = false;

    while (true) {
        const MissingModes missing = get_mode_collapse(real, pool);
        if (missing.empty()) {
            converged = true;
            break;
        }
        if (rounds >= max_rounds) break;
        ++rounds;
        for (const auto& [column, levels] : missing) {
            for (const auto& level : levels) {
                const auto& real_col = real.categorical(column);
                std::vector<std::size_t> slice_rows;
                for (std::size_t r = 0; r < real.rows(); ++r) {
                    if (real_col.label(r) == level) slice_rows.push_back(r);
                }
                while (slice_rows.size() < budget_m) {
                    slice_rows.push_back(augment_rng.below(real.rows()));  // oversample
                }
                const Table slice = real.take_rows(slice_rows);

                auto tuned = gen.clone();
                tuned->freeze_lower_layers();
                tuned->fine_tune(slice);
                const Table fresh = tuned->sample(budget_m, derive_seed(seed, tune_stream++));

                const auto evict = detail::eviction_rows(pool, column, budget_m);
                std::vector<bool> keep(pool.rows(), true);
                for (std::size_t r : evict) keep[r] = false;
                std::vector<std::size_t> kept_rows;
                kept_rows.reserve(pool.rows() - evict.size());
                for (std::size_t r = 0; r < pool.rows(); ++r) {
                    if (keep[r]) kept_rows.push_back(r);
                }
                pool = Table::concat(pool.take_rows(kept_rows), fresh);
                patched.emplace(column, level);
            }
        }
    }

    PatchResult result;
    result.synthetic = std::move(pool);
    result.metrics = repair_metrics(real, initial, result.synthetic);
    result.metrics.patched_levels = patched.size();
    result.converged = converged;
    result.rounds = rounds;
    return result;
}

}  // namespace synthkit
