// Shared plumbing: error type, deterministic RNG, hashing, small numeric helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace synthkit {

enum class Errc {
    missing_column,
    unparsable_numeric,
    missing_value,
    too_few_rows,
    column_kind_mismatch,
    empty_table,
    schema_mismatch,
    dimension_mismatch,
    empty_set,
    zero_pooled_std,
    missing_target,
    single_class_training,
    one_class_only,
    duplicate_items,
    mismatched_universe,
    non_categorical_sensitive,
    zero_variance_target,
    zero_distance,
    non_convergence,
    generator_failure,
    invalid_config,
    io_error,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message) : std::runtime_error(message), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable substream derivation: derive_seed(s, i) != derive_seed(s, j) for i != j.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base ^ (0x9e3779b97f4a7c15ULL + stream * 0xd1b54a32d192ed03ULL);
    splitmix64(s);
    return splitmix64(s);
}

// xoshiro256**. All randomness in the project goes through this type so that
// sequences are identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n) via rejection.
    std::size_t below(std::size_t n) {
        if (n == 0) fail(Errc::invalid_config, "Rng::below requires n > 0");
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return static_cast<std::size_t>(v % bound);
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[below(i)]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        shuffle(order);
        return order;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4] = {};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    return fnv1a_bytes(s.data(), s.size(), hash);
}

inline std::uint64_t fnv1a(double value, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    return fnv1a_bytes(&bits, sizeof(bits), hash);
}

inline unsigned worker_count() {
    if (const char* env = std::getenv("SYNTHKIT_WORKERS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed > 0) return static_cast<unsigned>(parsed);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Index-sharded parallel loop. Workers write to disjoint indices, so results do
// not depend on scheduling.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         unsigned workers = 0) {
    if (workers == 0) workers = worker_count();
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline double mean_of(std::span<const double> values) {
    if (values.empty()) fail(Errc::empty_set, "mean of empty range");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

// Sample variance (n-1 denominator).
inline double sample_variance(std::span<const double> values) {
    if (values.size() < 2) fail(Errc::too_few_rows, "sample variance needs >= 2 values");
    const double mu = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return ss / static_cast<double>(values.size() - 1);
}

inline double population_variance(std::span<const double> values) {
    const double mu = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return ss / static_cast<double>(values.size());
}

// Linear-interpolation quantile (type 7) over an already sorted range.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) fail(Errc::empty_set, "quantile of empty range");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::span<const double> values, double q) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, q);
}

}  // namespace synthkit
