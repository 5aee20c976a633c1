// Abstract samplers the filter and mode-patch loops drive, plus two reference
// implementations that stand in for trained neural generators at desk scale.
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/tabular.hpp"

namespace synthkit {

class GeneratorHandle {
public:
    virtual ~GeneratorHandle() = default;

    // Deterministic: identical (count, seed) must return identical tables.
    virtual Table sample(std::size_t count, std::uint64_t seed) const = 0;
    virtual const TableSchema& schema() const = 0;
};

// Extends the sampler with the hooks the patch loop needs. For statistical
// generators freeze_lower_layers is a no-op; neural adapters would freeze the
// feature-extracting layers here. The base generator is never mutated by the
// patch loop: tuning happens on clones only.
class PatchableGenerator : public GeneratorHandle {
public:
    virtual std::unique_ptr<PatchableGenerator> clone() const = 0;
    virtual void freeze_lower_layers() = 0;
    virtual void fine_tune(const Table& slice) = 0;
};

// Samples every column independently from its fitted empirical distribution.
// fine_tune re-fits all marginals on the given slice, so a tuned clone emits
// the slice's levels with matching probability.
class IndependentMarginalsGenerator final : public PatchableGenerator {
public:
    explicit IndependentMarginalsGenerator(const Table& fit_data) { refit(fit_data); }

    Table sample(std::size_t count, std::uint64_t seed) const override {
        Rng rng(derive_seed(seed, 0x6d617267ULL));
        const std::size_t n = fitted_rows_;
        std::vector<std::vector<double>> numeric(numeric_.size());
        std::vector<CategoricalColumn> categorical(categorical_.size());
        for (auto& col : numeric) col.reserve(count);
        for (std::size_t s = 0; s < categorical_.size(); ++s) {
            categorical[s].levels = categorical_[s].levels;
            categorical[s].codes.reserve(count);
        }
        for (std::size_t r = 0; r < count; ++r) {
            std::size_t num_slot = 0;
            std::size_t cat_slot = 0;
            for (const auto& col : schema_.columns()) {
                const std::size_t pick = rng.below(n);
                if (col.kind == ColumnKind::numeric) {
                    numeric[num_slot].push_back(numeric_[num_slot][pick]);
                    ++num_slot;
                } else {
                    categorical[cat_slot].codes.push_back(categorical_[cat_slot].codes[pick]);
                    ++cat_slot;
                }
            }
        }
        return Table(schema_, std::move(numeric), std::move(categorical));
    }

    const TableSchema& schema() const override { return schema_; }

    std::unique_ptr<PatchableGenerator> clone() const override {
        return std::make_unique<IndependentMarginalsGenerator>(*this);
    }

    void freeze_lower_layers() override {}  // statistical generator, nothing to freeze

    void fine_tune(const Table& slice) override {
        if (slice.rows() == 0) fail(Errc::empty_table, "fine_tune on empty slice");
        refit(slice);
    }

private:
    void refit(const Table& data) {
        if (data.rows() == 0) fail(Errc::empty_table, "generator fit on empty table");
        schema_ = data.schema();
        fitted_rows_ = data.rows();
        numeric_.clear();
        categorical_.clear();
        for (const auto& col : schema_.columns()) {
            if (col.kind == ColumnKind::numeric) {
                numeric_.push_back(data.numeric(col.name));
            } else {
                categorical_.push_back(data.categorical(col.name));
            }
        }
    }

    TableSchema schema_;
    std::vector<std::vector<double>> numeric_;
    std::vector<CategoricalColumn> categorical_;
    std::size_t fitted_rows_ = 0;
};

// Resamples whole rows and jitters numerics with sigma * column-std gaussian
// noise. sigma = 0 is an exact bootstrap.
class BootstrapJitterGenerator final : public GeneratorHandle {
public:
    BootstrapJitterGenerator(const Table& fit_data, double sigma) : data_(fit_data), sigma_(sigma) {
        if (fit_data.rows() == 0) fail(Errc::empty_table, "generator fit on empty table");
        if (sigma < 0.0) fail(Errc::invalid_config, "jitter sigma must be >= 0");
        for (const auto& name : data_.numeric_names()) {
            const auto& values = data_.numeric(name);
            column_std_.push_back(values.size() >= 2 ? std::sqrt(sample_variance(values)) : 0.0);
        }
    }

    Table sample(std::size_t count, std::uint64_t seed) const override {
        Rng rng(derive_seed(seed, 0x626f6f74ULL));
        const std::size_t n = data_.rows();
        std::vector<const std::vector<double>*> numeric_src;
        std::vector<const CategoricalColumn*> categorical_src;
        for (const auto& col : data_.schema().columns()) {
            if (col.kind == ColumnKind::numeric) numeric_src.push_back(&data_.numeric(col.name));
            else categorical_src.push_back(&data_.categorical(col.name));
        }
        std::vector<std::vector<double>> numeric(numeric_src.size());
        std::vector<CategoricalColumn> categorical(categorical_src.size());
        for (std::size_t s = 0; s < categorical.size(); ++s) categorical[s].levels = categorical_src[s]->levels;
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t pick = rng.below(n);
            for (std::size_t s = 0; s < numeric_src.size(); ++s) {
                double value = (*numeric_src[s])[pick];
                if (sigma_ > 0.0 && column_std_[s] > 0.0) {
                    value += rng.gaussian() * sigma_ * column_std_[s];
                }
                numeric[s].push_back(value);
            }
            for (std::size_t s = 0; s < categorical_src.size(); ++s) {
                categorical[s].codes.push_back(categorical_src[s]->codes[pick]);
            }
        }
        return Table(data_.schema(), std::move(numeric), std::move(categorical));
    }

    const TableSchema& schema() const override { return data_.schema(); }

private:
    Table data_;
    double sigma_;
    std::vector<double> column_std_;
};

inline std::unique_ptr<PatchableGenerator> make_independent_marginals(const Table& fit_data) {
    return std::make_unique<IndependentMarginalsGenerator>(fit_data);
}

inline std::unique_ptr<GeneratorHandle> make_bootstrap_jitter(const Table& fit_data, double sigma) {
    return std::make_unique<BootstrapJitterGenerator>(fit_data, sigma);
}

}  // namespace synthkit
