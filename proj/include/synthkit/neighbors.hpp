// Exact nearest-neighbor geometry over encoded rows: per-record privacy radii,
// ANY-margins with progressive widening, empirical ANY-risk, DCR queries,
// identifiability, and the kNN local-density proxy.
//
// Everything here is exact. Results must agree with an O(n^2) scan; distances
// use the shared squared_distance accumulation so the agreement is bit-level.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "synthkit/common.hpp"
#include "synthkit/encoder.hpp"

namespace synthkit {

struct MarginResult {
    double margin = 0.0;  // squared-distance units
    bool violating = false;
};

namespace detail {

// (squared distance, row index) sorted ascending, ties by index.
struct Neighbor {
    double dist_sq;
    std::size_t index;
    bool operator<(const Neighbor& other) const {
        if (dist_sq != other.dist_sq) return dist_sq < other.dist_sq;
        return index < other.index;
    }
};

inline std::vector<Neighbor> all_neighbors(const EncodedMatrix& points, std::span<const double> query) {
    std::vector<Neighbor> out(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) {
        out[i] = {squared_distance(query, points.row(i)), i};
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

class RadiusIndex {
public:
    // r_i is the k_eff-th nearest-neighbor distance of record i with the record
    // itself occupying the first slot, i.e. the (k_eff-1)-th nearest among the
    // other rows; k_eff = min(max(k,2), n_r). Self-exclusion is by row index,
    // so duplicate rows legitimately yield r_i = 0.
    static RadiusIndex build(EncodedMatrix points, std::size_t k) {
        if (points.rows < 2) fail(Errc::too_few_rows, "radius index needs at least 2 rows");
        RadiusIndex idx;
        idx.k_requested_ = k;
        idx.k_eff_ = std::min(std::max<std::size_t>(k, 2), points.rows);
        idx.points_ = std::move(points);
        const std::size_t n = idx.points_.rows;
        idx.radius_sq_.assign(n, 0.0);
        idx.radius_.assign(n, 0.0);
        const std::size_t rank = idx.k_eff_ - 2;  // position among others, 0-based
        parallel_for(n, [&](std::size_t i) {
            std::vector<detail::Neighbor> others;
            others.reserve(n - 1);
            const auto self = idx.points_.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                others.push_back({squared_distance(self, idx.points_.row(j)), j});
            }
            std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(rank), others.end());
            idx.radius_sq_[i] = others[rank].dist_sq;
            idx.radius_[i] = std::sqrt(idx.radius_sq_[i]);
        });
        idx.r_max_sq_ = *std::max_element(idx.radius_sq_.begin(), idx.radius_sq_.end());
        idx.r_max_ = std::sqrt(idx.r_max_sq_);
        return idx;
    }

    std::size_t size() const { return points_.rows; }
    std::size_t dim() const { return points_.cols; }
    std::size_t k_requested() const { return k_requested_; }
    std::size_t k_eff() const { return k_eff_; }
    const std::vector<double>& radii() const { return radius_; }
    const std::vector<double>& radii_squared() const { return radius_sq_; }
    double r_max() const { return r_max_; }
    double r_max_squared() const { return r_max_sq_; }
    const EncodedMatrix& points() const { return points_; }

    // M(x) = min over reals within R_max of (d^2 - r_i^2); if no real lies
    // within R_max the 1-NN fallback d_1^2 - R_max^2 is a valid bound (>= 0).
    // The candidate scan widens progressively: m = min(64, n_r), doubling until
    // the bound is certified or m = n_r.
    MarginResult margin(std::span<const double> x) const {
        if (x.size() != points_.cols) fail(Errc::dimension_mismatch, "margin query dimensionality");
        const std::size_t n = points_.rows;
        const auto neighbors = detail::all_neighbors(points_, x);
        double bound = std::numeric_limits<double>::infinity();
        std::size_t m = std::min<std::size_t>(64, n);
        std::size_t scanned = 0;
        while (true) {
            bool any_within = false;
            for (std::size_t j = 0; j < m; ++j) {
                if (neighbors[j].dist_sq <= r_max_sq_) any_within = true;
            }
            if (any_within) {
                for (std::size_t j = scanned; j < m; ++j) {
                    if (neighbors[j].dist_sq <= r_max_sq_) {
                        bound = std::min(bound, neighbors[j].dist_sq - radius_sq_[neighbors[j].index]);
                    }
                }
            } else {
                bound = std::min(bound, neighbors[0].dist_sq - r_max_sq_);
            }
            scanned = m;
            const double edge = neighbors[m - 1].dist_sq;
            if (edge >= r_max_sq_ || bound <= edge - r_max_sq_ || m == n) break;
            m = std::min(n, 2 * m);
        }
        return {bound, bound < 0.0};
    }

private:
    EncodedMatrix points_;
    std::vector<double> radius_;
    std::vector<double> radius_sq_;
    double r_max_ = 0.0;
    double r_max_sq_ = 0.0;
    std::size_t k_requested_ = 2;
    std::size_t k_eff_ = 2;
};

inline std::vector<MarginResult> margins(const RadiusIndex& idx, const EncodedMatrix& xs) {
    std::vector<MarginResult> out(xs.rows);
    parallel_for(xs.rows, [&](std::size_t i) { out[i] = idx.margin(xs.row(i)); });
    return out;
}

// Fraction of synthetic rows with negative margin (Eq. of the empirical ANY-risk).
inline double eps_any(const RadiusIndex& idx, const EncodedMatrix& xs) {
    if (xs.rows == 0) fail(Errc::empty_set, "eps_any over empty synthetic set");
    const auto ms = margins(idx, xs);
    std::size_t violating = 0;
    for (const auto& m : ms) violating += m.violating ? 1 : 0;
    return static_cast<double>(violating) / static_cast<double>(xs.rows);
}

// Per-row minimum distance to the reference set.
inline std::vector<double> dcr(const EncodedMatrix& reference, const EncodedMatrix& xs) {
    if (reference.rows == 0) fail(Errc::empty_set, "dcr against empty reference");
    if (reference.cols != xs.cols) fail(Errc::dimension_mismatch, "dcr dimensionality");
    std::vector<double> out(xs.rows);
    parallel_for(xs.rows, [&](std::size_t i) {
        const auto query = xs.row(i);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < reference.rows; ++j) {
            best = std::min(best, squared_distance(query, reference.row(j)));
        }
        out[i] = std::sqrt(best);
    });
    return out;
}

// I = (1/N) sum_i 1[rhat_i < r_i] with rhat_i the real-to-synthetic nearest
// distance and r_i the real 2-NN radius held by the index.
inline double identifiability(const RadiusIndex& real_index, const EncodedMatrix& xs) {
    if (xs.rows == 0) fail(Errc::empty_set, "identifiability over empty synthetic set");
    if (xs.cols != real_index.dim()) fail(Errc::dimension_mismatch, "identifiability dimensionality");
    const std::size_t n = real_index.size();
    std::vector<std::uint8_t> closer(n, 0);
    parallel_for(n, [&](std::size_t i) {
        const auto real_row = real_index.points().row(i);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < xs.rows; ++j) {
            best = std::min(best, squared_distance(real_row, xs.row(j)));
        }
        closer[i] = best < real_index.radii_squared()[i] ? 1 : 0;
    });
    std::size_t count = 0;
    for (auto c : closer) count += c;
    return static_cast<double>(count) / static_cast<double>(n);
}

struct DensityStats {
    double mean = 0.0;
    double variance = 0.0;  // population variance
    std::vector<double> proxies;
};

// Local-density proxy: inverse of the mean distance to the k nearest reference
// rows. Inputs are expected to be standardized numeric features; when the query
// matrix is the reference itself, set query_is_reference so index i skips itself.
inline DensityStats local_density_stats(const EncodedMatrix& reference, const EncodedMatrix& query,
                                        std::size_t k, bool query_is_reference) {
    if (k == 0) fail(Errc::invalid_config, "local density needs k >= 1");
    if (reference.rows <= k) fail(Errc::too_few_rows, "local density needs reference rows > k");
    if (reference.cols != query.cols) fail(Errc::dimension_mismatch, "local density dimensionality");
    if (query.rows == 0) fail(Errc::empty_set, "local density over empty query set");
    DensityStats stats;
    stats.proxies.assign(query.rows, 0.0);
    std::vector<std::uint8_t> degenerate(query.rows, 0);
    parallel_for(query.rows, [&](std::size_t q) {
        std::vector<detail::Neighbor> neighbors;
        neighbors.reserve(reference.rows);
        const auto row = query.row(q);
        for (std::size_t j = 0; j < reference.rows; ++j) {
            if (query_is_reference && j == q) continue;
            neighbors.push_back({squared_distance(row, reference.row(j)), j});
        }
        std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(k),
                          neighbors.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::sqrt(neighbors[j].dist_sq);
        const double mean_dist = sum / static_cast<double>(k);
        if (mean_dist <= 0.0) {
            degenerate[q] = 1;
            return;
        }
        stats.proxies[q] = 1.0 / mean_dist;
    });
    for (auto d : degenerate) {
        if (d) fail(Errc::zero_distance, "all k neighbors coincident; density proxy is infinite");
    }
    stats.mean = mean_of(stats.proxies);
    stats.variance = population_variance(stats.proxies);
    return stats;
}

}  // namespace synthkit
