// Rejection-with-replacement filter: resamples the worst synthetic record until
// the empirical ANY-risk drops below tau_any or the proposal budget runs out.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/encoder.hpp"
#include "synthkit/generator.hpp"
#include "synthkit/neighbors.hpp"
#include "synthkit/tabular.hpp"

namespace synthkit {

enum class FilterVariant { v0, v1, v2, custom };

inline const char* to_string(FilterVariant v) {
    switch (v) {
        case FilterVariant::v0: return "v0";
        case FilterVariant::v1: return "v1";
        case FilterVariant::v2: return "v2";
        case FilterVariant::custom: return "custom";
    }
    return "v0";
}

struct FilterConfig {
    double tau_any = 0.2;
    std::size_t sample_size = 1000;
    FilterVariant variant = FilterVariant::v0;
    WeightingSpec weighting;  // used when variant == custom
    std::size_t k = 2;        // used when variant == custom
    std::size_t max_proposals = 0;  // 0 -> 100 * sample_size
    std::uint64_t seed = 0;

    WeightingSpec resolved_weighting() const {
        switch (variant) {
            case FilterVariant::v0: return WeightingSpec{Weighting::unweighted, 1e-6};
            case FilterVariant::v1:
            case FilterVariant::v2: return WeightingSpec{Weighting::entropy, 1e-6};
            case FilterVariant::custom: return weighting;
        }
        return WeightingSpec{};
    }

    std::size_t resolved_k() const {
        switch (variant) {
            case FilterVariant::v0:
            case FilterVariant::v1: return 2;
            case FilterVariant::v2: return 5;
            case FilterVariant::custom: return k;
        }
        return 2;
    }

    std::size_t resolved_budget() const { return max_proposals ? max_proposals : 100 * sample_size; }

    void validate() const {
        if (!(tau_any > 0.0 && tau_any <= 1.0)) fail(Errc::invalid_config, "tau_any must be in (0,1]");
        if (sample_size == 0) fail(Errc::invalid_config, "sample size must be >= 1");
        if (variant == FilterVariant::custom && k == 0) fail(Errc::invalid_config, "k must be >= 1");
    }
};

enum class Feasibility { met_threshold, budget_exhausted };

inline const char* to_string(Feasibility f) {
    return f == Feasibility::met_threshold ? "met_threshold" : "budget_exhausted";
}

struct ReplacementRecord {
    std::size_t proposal;    // 1-based proposal counter at acceptance time
    std::size_t index;       // replaced synthetic row
    double old_margin;
    double new_margin;
    std::size_t violations_after;
};

struct FilterReport {
    Table synthetic;
    double final_eps = 0.0;
    double initial_eps = 0.0;
    std::size_t proposals = 0;
    std::size_t replacements = 0;
    Feasibility feasibility = Feasibility::met_threshold;
    std::vector<ReplacementRecord> trace;
    double tau = 0.0;
    FilterVariant variant = FilterVariant::v0;
    std::size_t k_requested = 2;
    std::size_t k_eff = 2;
    std::uint64_t encoder_fingerprint = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Mutable columnar copy of the synthetic pool so single-row replacement does
// not rebuild the whole Table. Categorical levels are remapped by label.
class RowPool {
public:
    explicit RowPool(const Table& initial) : schema_(initial.schema()) {
        for (const auto& col : schema_.columns()) {
            if (col.kind == ColumnKind::numeric) {
                numeric_.push_back(initial.numeric(col.name));
            } else {
                categorical_.push_back(initial.categorical(col.name));
            }
        }
        rows_ = initial.rows();
    }

    void replace_row(std::size_t row, const Table& source, std::size_t source_row) {
        std::size_t num_slot = 0;
        std::size_t cat_slot = 0;
        for (const auto& col : schema_.columns()) {
            if (col.kind == ColumnKind::numeric) {
                numeric_[num_slot][row] = source.numeric(col.name)[source_row];
                ++num_slot;
            } else {
                auto& dst = categorical_[cat_slot];
                const std::string& label = source.categorical(col.name).label(source_row);
                std::int32_t code = -1;
                for (std::size_t l = 0; l < dst.levels.size(); ++l) {
                    if (dst.levels[l] == label) {
                        code = static_cast<std::int32_t>(l);
                        break;
                    }
                }
                if (code < 0) {
                    code = static_cast<std::int32_t>(dst.levels.size());
                    dst.levels.push_back(label);
                }
                dst.codes[row] = code;
                ++cat_slot;
            }
        }
    }

    Table to_table() const {
        return Table(schema_, numeric_, categorical_);
    }

    std::size_t rows() const { return rows_; }

private:
    TableSchema schema_;
    std::vector<std::vector<double>> numeric_;
    std::vector<CategoricalColumn> categorical_;
    std::size_t rows_ = 0;
};

inline FilterReport run_filter_with(const GeneratorHandle& gen, const FilterConfig& cfg,
                                    const HeomEncoder& encoder, const RadiusIndex& index) {
    cfg.validate();
    const std::size_t n = cfg.sample_size;
    Table initial = gen.sample(n, derive_seed(cfg.seed, 0));
    if (initial.rows() != n) fail(Errc::generator_failure, "generator returned wrong row count");

    const EncodedMatrix encoded = encoder.encode(initial);
    const auto initial_margins = margins(index, encoded);
    std::vector<double> margin(n);
    std::size_t violations = 0;
    for (std::size_t i = 0; i < n; ++i) {
        margin[i] = initial_margins[i].margin;
        if (margin[i] < 0.0) ++violations;
    }

    FilterReport report;
    report.tau = cfg.tau_any;
    report.variant = cfg.variant;
    report.k_requested = cfg.resolved_k();
    report.k_eff = index.k_eff();
    report.encoder_fingerprint = encoder.fingerprint();
    report.seed = cfg.seed;
    report.initial_eps = static_cast<double>(violations) / static_cast<double>(n);

    RowPool pool(initial);
    const std::size_t budget = cfg.resolved_budget();
    std::size_t proposals = 0;

    auto eps = [&] { return static_cast<double>(violations) / static_cast<double>(n); };

    while (eps() >= cfg.tau_any && proposals < budget) {
        std::size_t worst = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (margin[i] < margin[worst]) worst = i;  // ties keep the lowest index
        }
        ++proposals;
        Table proposal = gen.sample(1, derive_seed(cfg.seed, proposals));
        if (proposal.rows() != 1) fail(Errc::generator_failure, "generator returned wrong row count");
        EncodedMatrix enc_proposal = encoder.encode(proposal);
        const double new_margin = index.margin(enc_proposal.row(0)).margin;
        const double old_margin = margin[worst];
        const bool fixes_violation = old_margin < 0.0 && new_margin >= 0.0;
        const bool improves_safe = old_margin >= 0.0 && new_margin > old_margin;
        if (fixes_violation || improves_safe) {
            pool.replace_row(worst, proposal, 0);
            margin[worst] = new_margin;
            if (old_margin < 0.0 && new_margin >= 0.0) --violations;
            report.trace.push_back({proposals, worst, old_margin, new_margin, violations});
        }
    }

    report.synthetic = pool.to_table();
    report.final_eps = eps();
    report.proposals = proposals;
    report.replacements = report.trace.size();
    report.feasibility =
        report.final_eps < cfg.tau_any ? Feasibility::met_threshold : Feasibility::budget_exhausted;
    return report;
}

}  // namespace detail

inline FilterReport run_filter(const Table& real, const GeneratorHandle& gen, const FilterConfig& cfg) {
    cfg.validate();
    if (real.rows() < 2) fail(Errc::too_few_rows, "filter needs >= 2 real rows");
    const HeomEncoder encoder = HeomEncoder::fit(real, cfg.resolved_weighting());
    const RadiusIndex index = RadiusIndex::build(encoder.encode(real), cfg.resolved_k());
    return detail::run_filter_with(gen, cfg, encoder, index);
}

// Independent runs per tau; the encoder and radius index are fit once and
// shared. Cell i is seeded with derive_seed(base seed, i).
inline std::vector<std::pair<double, FilterReport>> sweep(const Table& real, const GeneratorHandle& gen,
                                                          const std::vector<double>& taus,
                                                          const FilterConfig& base) {
    if (taus.empty()) fail(Errc::invalid_config, "sweep needs at least one tau");
    for (double tau : taus) {
        if (!(tau > 0.0 && tau <= 1.0)) fail(Errc::invalid_config, "tau values must be in (0,1]");
    }
    if (real.rows() < 2) fail(Errc::too_few_rows, "filter needs >= 2 real rows");
    const HeomEncoder encoder = HeomEncoder::fit(real, base.resolved_weighting());
    const RadiusIndex index = RadiusIndex::build(encoder.encode(real), base.resolved_k());
    std::vector<std::pair<double, FilterReport>> out(taus.size());
    parallel_for(taus.size(), [&](std::size_t i) {
        FilterConfig cfg = base;
        cfg.tau_any = taus[i];
        cfg.seed = derive_seed(base.seed, i);
        out[i] = {taus[i], detail::run_filter_with(gen, cfg, encoder, index)};
    });
    return out;
}

}  // namespace synthkit
