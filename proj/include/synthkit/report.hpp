// JSON views of the result structures. nlohmann::json keeps keys sorted, so a
// serialized results block is byte-stable for identical inputs.
#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <json.hpp>

#include "synthkit/fidelity.hpp"
#include "synthkit/filter.hpp"
#include "synthkit/modepatch.hpp"
#include "synthkit/privacy.hpp"
#include "synthkit/utility.hpp"

namespace synthkit {

using json = nlohmann::json;

inline json to_json(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const MissingModes& modes) {
    json out = json::object();
    for (const auto& [column, levels] : modes) out[column] = levels;
    return out;
}

inline json to_json(const FilterReport& report) {
    json trace = json::array();
    for (const auto& rec : report.trace) {
        trace.push_back({
            {"proposal", rec.proposal},
            {"index", rec.index},
            {"old_margin", rec.old_margin},
            {"new_margin", rec.new_margin},
            {"violations_after", rec.violations_after},
        });
    }
    return {
        {"final_eps", report.final_eps},
        {"initial_eps", report.initial_eps},
        {"tau", report.tau},
        {"variant", to_string(report.variant)},
        {"k", report.k_requested},
        {"k_eff", report.k_eff},
        {"proposals", report.proposals},
        {"replacements", report.replacements},
        {"feasibility", to_string(report.feasibility)},
        {"encoder_fingerprint", report.encoder_fingerprint},
        {"seed", report.seed},
        {"trace", std::move(trace)},
    };
}

inline json to_json(const RepairMetrics& metrics) {
    json zcr = json::object();
    for (const auto& [column, value] : metrics.zcr_pre) zcr[column] = value;
    json out = {
        {"zcr_pre", std::move(zcr)},
        {"columns_with_zcr_pre", metrics.columns_with_zcr_pre},
        {"mar", metrics.mar},
        {"missing_pre", metrics.missing_pre},
        {"missing_post", metrics.missing_post},
        {"patched_levels", metrics.patched_levels},
        {"delta_mean_jsd", metrics.delta_mean_jsd},
    };
    if (metrics.srr) out["srr"] = *metrics.srr;
    return out;
}

inline json to_json(const CategoricalComparison& cmp) {
    json levels = json::object();
    for (const auto& level : cmp.levels) {
        levels[level.label] = {
            {"p_real", level.p_real},
            {"p_synth", level.p_synth},
            {"log2fc", to_json(level.log2fc)},
            {"js_contrib", level.js_contrib},
        };
    }
    return {
        {"js_divergence_bits", cmp.js_divergence_bits},
        {"js_distance", cmp.js_distance},
        {"levels", std::move(levels)},
    };
}

inline json to_json(const QuantileComparison& cmp) {
    return {
        {"q_low", cmp.q_low},
        {"q_high", cmp.q_high},
        {"delta_med", to_json(cmp.delta_med)},
        {"delta_low", to_json(cmp.delta_low)},
        {"delta_high", to_json(cmp.delta_high)},
        {"delta_p_low_pp", cmp.delta_p_low_pp},
        {"delta_p_high_pp", cmp.delta_p_high_pp},
    };
}

inline json to_json(const PairwiseMatrix& m) {
    return {
        {"rows", m.row_names},
        {"cols", m.col_names},
        {"values", m.values},
    };
}

inline json to_json(const FamilySummary& fam) {
    return {
        {"frobenius_diff", fam.frobenius_diff},
        {"spearman", to_json(fam.spearman)},
        {"real", to_json(fam.real)},
        {"synth", to_json(fam.synth)},
        {"degenerate_pairs", fam.degenerate_pairs},
    };
}

inline json to_json(const DependenceSummary& dep) {
    json out = json::object();
    out["pearson"] = dep.pearson ? to_json(*dep.pearson) : json(nullptr);
    out["cramers_v"] = dep.cramers_v ? to_json(*dep.cramers_v) : json(nullptr);
    out["eta2"] = dep.eta2 ? to_json(*dep.eta2) : json(nullptr);
    return out;
}

inline json to_json(const ClassificationMetrics& m) {
    return {
        {"accuracy", m.accuracy},
        {"balanced_accuracy", to_json(m.balanced_accuracy)},
        {"weighted_f1", m.weighted_f1},
        {"roc_auc", to_json(m.roc_auc)},
        {"log_loss", m.log_loss},
    };
}

inline json to_json(const UtilityScores& scores) {
    json cells = json::array();
    for (const auto& cell : scores.cells) {
        cells.push_back({
            {"learner", cell.learner},
            {"protocol", cell.protocol},
            {"metrics", to_json(cell.metrics)},
        });
    }
    auto map_json = [](const std::map<std::string, std::optional<double>>& m) {
        json out = json::object();
        for (const auto& [key, value] : m) out[key] = to_json(value);
        return out;
    };
    return {
        {"cells", std::move(cells)},
        {"mean_trtr", map_json(scores.mean_trtr)},
        {"mean_tstr", map_json(scores.mean_tstr)},
        {"gap", map_json(scores.gap)},
    };
}

inline json to_json(const ImportanceRanking& ranking) {
    json scores = json::object();
    for (const auto& [feature, score] : ranking.scores) scores[feature] = score;
    return {
        {"ranked_features", ranking.ranked_features},
        {"scores", std::move(scores)},
    };
}

inline json to_json(const RboResult& r) {
    return {{"normalized", r.normalized}, {"raw", r.raw}};
}

inline json to_json(const DcrReport& report) {
    double sum_train = 0.0, sum_test = 0.0;
    for (double v : report.dcr_train) sum_train += v;
    for (double v : report.dcr_test) sum_test += v;
    json out = {
        {"rpr", report.rpr},
        {"proximity_share", report.proximity_share},
        {"dcr_train_sum", sum_train},
        {"dcr_test_sum", sum_test},
        {"dcr_train_mean", sum_train / static_cast<double>(report.dcr_train.size())},
        {"dcr_test_mean", sum_test / static_cast<double>(report.dcr_test.size())},
    };
    out["delta_rpr"] = to_json(report.delta_rpr);
    return out;
}

inline json to_json(const CapEntry& entry) {
    return {
        {"sensitive", entry.sensitive},
        {"cap", entry.cap},
        {"protection", entry.protection},
        {"records", entry.records},
        {"matched_records", entry.matched_records},
    };
}

inline json to_json(const CapReport& report) {
    json entries = json::array();
    for (const auto& entry : report.entries) entries.push_back(to_json(entry));
    return {
        {"entries", std::move(entries)},
        {"median_protection", to_json(report.median_protection)},
    };
}

inline json to_json(const AiaEntry& entry) {
    json out = {
        {"target", entry.target},
        {"kind", entry.kind},
        {"trained_on", entry.trained_on},
        {"score", entry.score},
        {"degenerate", entry.degenerate},
    };
    out["rmse"] = to_json(entry.rmse);
    return out;
}

inline json to_json(const LDiversityEntry& entry) {
    return {
        {"sensitive", entry.sensitive},
        {"groups", entry.groups},
        {"min_distinct", entry.min_distinct},
        {"mean_distinct", entry.mean_distinct},
    };
}

}  // namespace synthkit
