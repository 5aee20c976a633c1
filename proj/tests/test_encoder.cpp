#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "synthkit/encoder.hpp"

using namespace synthkit;
using testutil::TableBuilder;

TEST_CASE("fit records numeric min/max and one dimension per level") {
    const Table real = TableBuilder().num("x", {0, 10, 5}).cat("c", {"a", "b", "c"}).build();
    const HeomEncoder enc = HeomEncoder::fit(real);
    CHECK(enc.dim() == 1 + 3);

    const EncodedMatrix m = enc.encode(real);
    CHECK(m.row(0)[0] == 0.0);  // fitted min maps to 0
    CHECK(m.row(1)[0] == 1.0);
    CHECK(m.row(0)[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(m.row(0)[2] == 0.0);
}

TEST_CASE("encode clamps out-of-range numerics and zeros unseen levels") {
    const Table real = TableBuilder().num("x", {0, 10}).cat("c", {"a", "b"}).build();
    const HeomEncoder enc = HeomEncoder::fit(real);
    const Table other = TableBuilder().num("x", {-5, 25}).cat("c", {"a", "zzz"}).build();
    const EncodedMatrix m = enc.encode(other);
    CHECK(m.row(0)[0] == 0.0);
    CHECK(m.row(1)[0] == 1.0);
    CHECK(m.row(1)[1] == 0.0);  // unseen level -> all-zeros block
    CHECK(m.row(1)[2] == 0.0);
}

TEST_CASE("constant numeric column encodes to 0.5 and contributes no distance") {
    const Table real = TableBuilder().num("x", {4, 4, 4}).num("y", {0, 1, 2}).build();
    const HeomEncoder enc = HeomEncoder::fit(real);
    const EncodedMatrix m = enc.encode(real);
    CHECK(m.row(0)[0] == 0.5);
    CHECK(m.row(2)[0] == 0.5);
    CHECK(squared_distance(m.row(0), m.row(2)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rows differing in one categorical level are unit-separated") {
    const Table real = TableBuilder().num("x", {1, 1}).cat("c", {"a", "b"}).build();
    const HeomEncoder enc = HeomEncoder::fit(real);
    const EncodedMatrix m = enc.encode(real);
    CHECK(distance(m.row(0), m.row(1)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(distance(m.row(0), m.row(0)) == 0.0);
}

TEST_CASE("unweighted encodings stay in range") {
    Rng rng(31);
    const Table real = testutil::random_mixed_table(rng, 60, 3, 3);
    const HeomEncoder enc = HeomEncoder::fit(real);
    const EncodedMatrix m = enc.encode(real);
    const double one_hot = 1.0 / std::sqrt(2.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t d = 0; d < 3; ++d) {
            CHECK(m.row(r)[d] >= 0.0);
            CHECK(m.row(r)[d] <= 1.0);
        }
        std::size_t nonzero = 0;
        for (std::size_t d = 3; d < m.cols; ++d) {
            const double v = m.row(r)[d];
            CHECK((v == 0.0 || v == doctest::Approx(one_hot).epsilon(1e-12)));
            if (v != 0.0) ++nonzero;
        }
        CHECK(nonzero == 3);  // one active dimension per categorical column
    }
}

TEST_CASE("distance is a metric on random encodings") {
    Rng rng(37);
    const Table real = testutil::random_mixed_table(rng, 40, 2, 2);
    const HeomEncoder enc = HeomEncoder::fit(real);
    const EncodedMatrix m = enc.encode(real);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = m.row(rng.below(m.rows));
        const auto b = m.row(rng.below(m.rows));
        const auto c = m.row(rng.below(m.rows));
        const double ab = distance(a, b);
        const double ba = distance(b, a);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(distance(a, c) <= ab + distance(b, c) + 1e-12);
    }
}

TEST_CASE("distance dimension mismatch is an error") {
    const Table a = TableBuilder().num("x", {0, 1}).build();
    const Table b = TableBuilder().num("x", {0, 1}).num("y", {0, 1}).build();
    const auto ma = HeomEncoder::fit(a).encode(a);
    const auto mb = HeomEncoder::fit(b).encode(b);
    CHECK_THROWS_AS(distance(ma.row(0), mb.row(0)), Error);
}

TEST_CASE("entropy: point mass is 0 bits, raw weight is 1/eps") {
    const Table real = TableBuilder().cat("c", {"a", "a", "a", "a"}).cat("d", {"x", "y", "x", "y"}).build();
    const HeomEncoder enc = HeomEncoder::fit(real, {Weighting::entropy, 1e-6});
    CHECK(enc.entropy_bits("c") == 0.0);
    CHECK(enc.raw_weight("c") == doctest::Approx(1e6).epsilon(1e-9));
    // uniform over 2 levels -> 1 bit, checked against a direct -sum p log2 p
    CHECK(enc.entropy_bits("d") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("categorical entropy is permutation invariant and merging levels lowers it") {
    const std::vector<std::string> values = {"a", "b", "b", "c", "a", "c", "c", "b", "a", "c"};
    std::vector<std::string> shuffled = values;
    Rng rng(5);
    rng.shuffle(shuffled);
    const Table t1 = TableBuilder().cat("c", values).build();
    const Table t2 = TableBuilder().cat("c", shuffled).build();
    CHECK(categorical_entropy_bits(t1.categorical("c")) ==
          doctest::Approx(categorical_entropy_bits(t2.categorical("c"))).epsilon(1e-12));

    std::vector<std::string> merged = values;
    for (auto& v : merged) {
        if (v == "b") v = "a";  // merge two levels
    }
    const Table t3 = TableBuilder().cat("c", merged).build();
    CHECK(categorical_entropy_bits(t3.categorical("c")) <=
          categorical_entropy_bits(t1.categorical("c")) + 1e-12);
}

TEST_CASE("numeric entropy handles the degenerate IQR case") {
    std::vector<double> spike(50, 3.0);
    CHECK(numeric_entropy_bits(spike) == 0.0);
    std::vector<double> spread;
    Rng rng(41);
    for (int i = 0; i < 500; ++i) spread.push_back(rng.uniform());
    CHECK(numeric_entropy_bits(spread) > 0.0);
}

TEST_CASE("equal-entropy weighting preserves the distance ordering") {
    // Two categorical columns with identical level frequencies have equal H_c,
    // so the weighted distances are a global rescale of the unweighted ones.
    Rng rng(43);
    std::vector<std::string> c0(80);
    for (std::size_t i = 0; i < 80; ++i) c0[i] = "L" + std::to_string(rng.below(3));
    std::vector<std::string> c1_matched(80);
    for (std::size_t i = 0; i < 80; ++i) c1_matched[i] = "M" + c0[i].substr(1);  // same frequency profile
    Rng rng2(44);
    rng2.shuffle(c1_matched);

    const Table real = TableBuilder().cat("c0", c0).cat("c1", c1_matched).build();
    const HeomEncoder plain = HeomEncoder::fit(real);
    const HeomEncoder weighted = HeomEncoder::fit(real, {Weighting::entropy, 1e-6});
    REQUIRE(plain.entropy_bits("c0") == doctest::Approx(plain.entropy_bits("c1")).epsilon(1e-12));

    const EncodedMatrix mu = plain.encode(real);
    const EncodedMatrix mw = weighted.encode(real);
    std::vector<std::pair<double, std::size_t>> order_u, order_w;
    std::size_t pair_id = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t j = i + 1; j < 20; ++j) {
            order_u.push_back({squared_distance(mu.row(i), mu.row(j)), pair_id});
            order_w.push_back({squared_distance(mw.row(i), mw.row(j)), pair_id});
            ++pair_id;
        }
    }
    std::sort(order_u.begin(), order_u.end());
    std::sort(order_w.begin(), order_w.end());
    for (std::size_t i = 0; i < order_u.size(); ++i) CHECK(order_u[i].second == order_w[i].second);
}

TEST_CASE("entropy weights are normalized to mean 1 across columns") {
    Rng rng(47);
    const Table real = testutil::random_mixed_table(rng, 100, 2, 2);
    const HeomEncoder enc = HeomEncoder::fit(real, {Weighting::entropy, 1e-6});
    // Recover per-column weights from the scale vector: numeric dims first.
    const auto& scale = enc.weight_scale();
    const double w0 = scale[0] * scale[0];
    const double w1 = scale[1] * scale[1];
    const double w2 = scale[2] * scale[2];
    std::size_t c1_levels = real.categorical("c1").levels.size();
    const double w3 = scale[enc.dim() - c1_levels] * scale[enc.dim() - c1_levels];
    CHECK((w0 + w1 + w2 + w3) / 4.0 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fit/encode error paths") {
    const Table empty = TableBuilder().num("x", {}).build();
    CHECK_THROWS_AS(HeomEncoder::fit(empty), Error);

    const Table real = TableBuilder().num("x", {0, 1}).build();
    const HeomEncoder enc = HeomEncoder::fit(real);
    const Table wrong_kind = TableBuilder().cat("x", {"a", "b"}).build();
    CHECK_THROWS_AS(enc.encode(wrong_kind), Error);
}

TEST_CASE("fingerprint changes with fitting data") {
    const Table a = TableBuilder().num("x", {0, 1}).build();
    const Table b = TableBuilder().num("x", {0, 2}).build();
    CHECK(HeomEncoder::fit(a).fingerprint() != HeomEncoder::fit(b).fingerprint());
    CHECK(HeomEncoder::fit(a).fingerprint() == HeomEncoder::fit(a).fingerprint());
}
