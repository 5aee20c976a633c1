// Shared test utilities: table builders, random mixed-type tables, and the
// O(n^2) brute-force oracles the geometry contracts are checked against. The
// oracles use their own loops and must stay independent of the library's
// query implementations; only the element-wise distance arithmetic is shared
// by construction (plain ascending accumulation of squared differences).
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/encoder.hpp"
#include "synthkit/tabular.hpp"

namespace testutil {

using synthkit::CategoricalColumn;
using synthkit::ColumnKind;
using synthkit::ColumnRole;
using synthkit::ColumnSpec;
using synthkit::EncodedMatrix;
using synthkit::Rng;
using synthkit::Table;
using synthkit::TableSchema;

inline CategoricalColumn categorical_from_labels(const std::vector<std::string>& values) {
    CategoricalColumn col;
    std::map<std::string, std::int32_t> index;
    for (const auto& label : values) {
        auto it = index.find(label);
        if (it == index.end()) {
            it = index.emplace(label, static_cast<std::int32_t>(col.levels.size())).first;
            col.levels.push_back(label);
        }
        col.codes.push_back(it->second);
    }
    return col;
}

// Builds a table from (name, kind, payload) triples given in schema order.
struct TableBuilder {
    std::vector<ColumnSpec> specs;
    std::vector<std::vector<double>> numeric;
    std::vector<CategoricalColumn> categorical;

    TableBuilder& num(const std::string& name, std::vector<double> values,
                      ColumnRole role = ColumnRole::feature) {
        specs.push_back({name, ColumnKind::numeric, role});
        numeric.push_back(std::move(values));
        return *this;
    }

    TableBuilder& cat(const std::string& name, std::vector<std::string> values,
                      ColumnRole role = ColumnRole::feature) {
        specs.push_back({name, ColumnKind::categorical, role});
        categorical.push_back(categorical_from_labels(values));
        return *this;
    }

    Table build() const { return Table(TableSchema(specs), numeric, categorical); }
};

// Random mixed-type table: numeric columns uniform in [0, 10), categorical
// columns over 2-5 levels.
inline Table random_mixed_table(Rng& rng, std::size_t rows, std::size_t numeric_cols,
                                std::size_t categorical_cols) {
    TableBuilder builder;
    for (std::size_t c = 0; c < numeric_cols; ++c) {
        std::vector<double> values(rows);
        for (auto& v : values) v = 10.0 * rng.uniform();
        builder.num("n" + std::to_string(c), std::move(values));
    }
    for (std::size_t c = 0; c < categorical_cols; ++c) {
        const std::size_t levels = 2 + rng.below(4);
        std::vector<std::string> values(rows);
        for (auto& v : values) v = "L" + std::to_string(rng.below(levels));
        builder.cat("c" + std::to_string(c), std::move(values));
    }
    return builder.build();
}

namespace oracle {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

// k_eff-th nearest with self in slot 1 == (k_eff-1)-th nearest among others.
inline std::vector<double> radii_squared(const EncodedMatrix& points, std::size_t k) {
    const std::size_t n = points.rows;
    const std::size_t k_eff = std::min(std::max<std::size_t>(k, 2), n);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dists;
        dists.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dists.push_back(sq_dist(points.row(i), points.row(j)));
        }
        std::sort(dists.begin(), dists.end());
        out[i] = dists[k_eff - 2];
    }
    return out;
}

inline double margin(const EncodedMatrix& reals, const std::vector<double>& radii_sq,
                     std::span<const double> x) {
    const double r_max_sq = *std::max_element(radii_sq.begin(), radii_sq.end());
    double best = std::numeric_limits<double>::infinity();
    double nearest = std::numeric_limits<double>::infinity();
    bool any_within = false;
    for (std::size_t i = 0; i < reals.rows; ++i) {
        const double d_sq = sq_dist(x, reals.row(i));
        nearest = std::min(nearest, d_sq);
        if (d_sq <= r_max_sq) {
            any_within = true;
            best = std::min(best, d_sq - radii_sq[i]);
        }
    }
    if (!any_within) return nearest - r_max_sq;
    return best;
}

inline double eps_any(const EncodedMatrix& reals, const std::vector<double>& radii_sq,
                      const EncodedMatrix& synth) {
    std::size_t violations = 0;
    for (std::size_t j = 0; j < synth.rows; ++j) {
        if (margin(reals, radii_sq, synth.row(j)) < 0.0) ++violations;
    }
    return static_cast<double>(violations) / static_cast<double>(synth.rows);
}

inline std::vector<double> dcr(const EncodedMatrix& reference, const EncodedMatrix& synth) {
    std::vector<double> out(synth.rows);
    for (std::size_t j = 0; j < synth.rows; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < reference.rows; ++i) {
            best = std::min(best, sq_dist(synth.row(j), reference.row(i)));
        }
        out[j] = std::sqrt(best);
    }
    return out;
}

inline double identifiability(const EncodedMatrix& reals, const std::vector<double>& radii_sq,
                              const EncodedMatrix& synth) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < reals.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < synth.rows; ++j) {
            best = std::min(best, sq_dist(reals.row(i), synth.row(j)));
        }
        if (best < radii_sq[i]) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(reals.rows);
}

}  // namespace oracle

}  // namespace testutil
