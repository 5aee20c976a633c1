// HEOM mixed-type embedding: min-max scaled numerics, one-hot categoricals
// scaled by 1/sqrt(2), optional entropy-derived per-column weights.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/tabular.hpp"

namespace synthkit {

struct EncodedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major
    std::uint64_t encoder_fingerprint = 0;

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data.data() + r * cols, cols);
    }
    std::span<double> row(std::size_t r) {
        return std::span<double>(data.data() + r * cols, cols);
    }
};

// Squared Euclidean distance with plain ascending accumulation. The brute-force
// oracles in the test suite use the same accumulation order, which makes the
// exact-equality contracts on margins/radii/DCR meaningful.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(Errc::dimension_mismatch, "encoded dimensionality differs");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

enum class Weighting { unweighted, entropy };

struct WeightingSpec {
    Weighting kind = Weighting::unweighted;
    double epsilon = 1e-6;
};

// Shannon entropy in bits of a categorical column.
inline double categorical_entropy_bits(const CategoricalColumn& col) {
    std::vector<std::size_t> counts(col.levels.size(), 0);
    for (std::int32_t code : col.codes) counts[static_cast<std::size_t>(code)]++;
    const double n = static_cast<double>(col.codes.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

// Histogram entropy in bits with Freedman-Diaconis bin width. IQR = 0 or a
// constant column collapses to a single bin (entropy 0).
inline double numeric_entropy_bits(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) fail(Errc::empty_table, "entropy of empty column");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    const double range = hi - lo;
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    if (range <= 0.0 || iqr <= 0.0) return 0.0;
    const double width = 2.0 * iqr * std::pow(static_cast<double>(n), -1.0 / 3.0);
    std::size_t bins = static_cast<std::size_t>(std::ceil(range / width));
    bins = std::clamp<std::size_t>(bins, 1, 1u << 16);  // guard against pathological IQR
    std::vector<std::size_t> counts(bins, 0);
    for (double v : sorted) {
        auto idx = static_cast<std::size_t>((v - lo) / range * static_cast<double>(bins));
        if (idx >= bins) idx = bins - 1;
        counts[idx]++;
    }
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h;
}

class HeomEncoder {
public:
    struct NumericSpec {
        std::string name;
        double min = 0.0;
        double max = 0.0;
    };
    struct CategoricalSpec {
        std::string name;
        std::vector<std::string> levels;
        std::unordered_map<std::string, std::size_t> index;
    };

    static HeomEncoder fit(const Table& real, const WeightingSpec& weighting = {}) {
        if (real.rows() == 0) fail(Errc::empty_table, "cannot fit encoder on empty table");
        HeomEncoder enc;
        enc.weighting_ = weighting;
        std::size_t dim = 0;
        for (const auto& col : real.schema().columns()) {
            ColumnRef ref;
            ref.name = col.name;
            ref.kind = col.kind;
            ref.first_dim = dim;
            if (col.kind == ColumnKind::numeric) {
                const auto& values = real.numeric(col.name);
                NumericSpec spec{col.name, values[0], values[0]};
                for (double v : values) {
                    spec.min = std::min(spec.min, v);
                    spec.max = std::max(spec.max, v);
                }
                ref.payload = enc.numeric_.size();
                ref.width = 1;
                enc.numeric_.push_back(std::move(spec));
                enc.entropy_bits_.push_back(numeric_entropy_bits(values));
            } else {
                const auto& source = real.categorical(col.name);
                CategoricalSpec spec;
                spec.name = col.name;
                spec.levels = source.levels;
                for (std::size_t l = 0; l < spec.levels.size(); ++l) spec.index.emplace(spec.levels[l], l);
                ref.payload = enc.categorical_.size();
                ref.width = spec.levels.size();
                enc.categorical_.push_back(std::move(spec));
                enc.entropy_bits_.push_back(categorical_entropy_bits(source));
            }
            dim += ref.width;
            enc.columns_.push_back(std::move(ref));
        }
        enc.dim_ = dim;
        enc.build_weights();
        enc.fingerprint_ = enc.compute_fingerprint();
        return enc;
    }

    std::size_t dim() const { return dim_; }
    std::uint64_t fingerprint() const { return fingerprint_; }
    const WeightingSpec& weighting() const { return weighting_; }

    // Raw 1/(H_c + eps) weight of a column, before mean-1 normalization.
    double raw_weight(const std::string& column) const {
        return 1.0 / (entropy_bits_[column_index(column)] + weighting_.epsilon);
    }
    double entropy_bits(const std::string& column) const { return entropy_bits_[column_index(column)]; }
    const std::vector<double>& weight_scale() const { return w_scale_; }

    EncodedMatrix encode(const Table& t) const {
        EncodedMatrix out;
        out.rows = t.rows();
        out.cols = dim_;
        out.encoder_fingerprint = fingerprint_;
        out.data.assign(out.rows * out.cols, 0.0);
        for (const auto& col : columns_) {
            const auto schema_idx = t.schema().find(col.name);
            if (!schema_idx || t.schema().at(*schema_idx).kind != col.kind) {
                fail(Errc::schema_mismatch, "table does not match encoder column " + col.name);
            }
            if (col.kind == ColumnKind::numeric) {
                const auto& spec = numeric_[col.payload];
                const auto& values = t.numeric(col.name);
                const double range = spec.max - spec.min;
                for (std::size_t r = 0; r < out.rows; ++r) {
                    double v;
                    if (range <= 0.0) {
                        v = 0.5;  // constant column carries no proximity signal
                    } else {
                        v = (values[r] - spec.min) / range;
                        v = std::clamp(v, 0.0, 1.0);
                    }
                    out.data[r * dim_ + col.first_dim] = v * w_scale_[col.first_dim];
                }
            } else {
                const auto& spec = categorical_[col.payload];
                const auto& source = t.categorical(col.name);
                constexpr double kOneHot = 0.70710678118654752440;  // 1/sqrt(2)
                std::vector<std::ptrdiff_t> remap(source.levels.size(), -1);
                for (std::size_t l = 0; l < source.levels.size(); ++l) {
                    auto it = spec.index.find(source.levels[l]);
                    if (it != spec.index.end()) remap[l] = static_cast<std::ptrdiff_t>(it->second);
                }
                for (std::size_t r = 0; r < out.rows; ++r) {
                    const auto mapped = remap[static_cast<std::size_t>(source.codes[r])];
                    if (mapped < 0) continue;  // unseen level -> all-zeros block
                    const std::size_t d = col.first_dim + static_cast<std::size_t>(mapped);
                    out.data[r * dim_ + d] = kOneHot * w_scale_[d];
                }
            }
        }
        return out;
    }

private:
    struct ColumnRef {
        std::string name;
        ColumnKind kind = ColumnKind::numeric;
        std::size_t payload = 0;
        std::size_t first_dim = 0;
        std::size_t width = 0;
    };

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (columns_[i].name == name) return i;
        }
        fail(Errc::missing_column, "encoder has no column " + name);
    }

    void build_weights() {
        w_scale_.assign(dim_, 1.0);
        if (weighting_.kind == Weighting::unweighted) return;
        std::vector<double> raw(columns_.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            raw[i] = 1.0 / (entropy_bits_[i] + weighting_.epsilon);
            sum += raw[i];
        }
        // Normalize to mean 1 across columns so weighted and unweighted radii
        // live on comparable scales.
        const double scale = static_cast<double>(columns_.size()) / sum;
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            const double w = raw[i] * scale;
            const double s = std::sqrt(w);
            for (std::size_t d = 0; d < columns_[i].width; ++d) {
                w_scale_[columns_[i].first_dim + d] = s;
            }
        }
    }

    std::uint64_t compute_fingerprint() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& col : columns_) {
            h = fnv1a(col.name, h);
            h = fnv1a_bytes(&col.kind, sizeof(col.kind), h);
            if (col.kind == ColumnKind::numeric) {
                h = fnv1a(numeric_[col.payload].min, h);
                h = fnv1a(numeric_[col.payload].max, h);
            } else {
                for (const auto& label : categorical_[col.payload].levels) h = fnv1a(label, h);
            }
        }
        for (double w : w_scale_) h = fnv1a(w, h);
        return h;
    }

    std::vector<ColumnRef> columns_;
    std::vector<NumericSpec> numeric_;
    std::vector<CategoricalSpec> categorical_;
    std::vector<double> entropy_bits_;  // per column, fitting order
    std::vector<double> w_scale_;       // per dimension
    WeightingSpec weighting_;
    std::size_t dim_ = 0;
    std::uint64_t fingerprint_ = 0;
};

}  // namespace synthkit
