#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "synthkit/privacy.hpp"

using namespace synthkit;
using testutil::TableBuilder;

namespace {

Table grid_table(const std::vector<double>& xs, const std::vector<double>& ys) {
    return TableBuilder().num("x", xs).num("y", ys).build();
}

}  // namespace

TEST_CASE("rpr is 50 on symmetric constructions") {
    // Train and test mirror each other around the synthetic points.
    const Table train = grid_table({0.0, 0.0}, {1.0, -1.0});
    const Table test = grid_table({2.0, 2.0}, {1.0, -1.0});
    const Table synth = grid_table({1.0, 1.0}, {1.0, -1.0});
    const HeomEncoder enc = HeomEncoder::fit(Table::concat(train, test));
    const auto report = dcr_rpr(enc, train, test, synth);
    CHECK(report.rpr == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(report.proximity_share == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("synthetic rows equal to train rows drive rpr to 0") {
    Rng rng(83);
    const Table train = testutil::random_mixed_table(rng, 20, 2, 1);
    const Table test = testutil::random_mixed_table(rng, 10, 2, 1);
    const HeomEncoder enc = HeomEncoder::fit(train);
    const auto report = dcr_rpr(enc, train, test, train);
    CHECK(report.rpr == 0.0);
    CHECK(report.proximity_share == 100.0);
    for (double v : report.dcr_train) CHECK(v == 0.0);
}

TEST_CASE("moving synthetic rows closer to train decreases rpr") {
    const Table train = grid_table({0.0, 1.0}, {0.0, 0.0});
    const Table test = grid_table({10.0, 11.0}, {0.0, 0.0});
    const HeomEncoder enc = HeomEncoder::fit(Table::concat(train, test));
    const Table synth_far = grid_table({6.0, 6.5}, {0.0, 0.0});
    const Table synth_near = grid_table({2.0, 2.5}, {0.0, 0.0});
    const auto far = dcr_rpr(enc, train, test, synth_far);
    const auto near = dcr_rpr(enc, train, test, synth_near);
    CHECK(near.rpr < far.rpr);
}

TEST_CASE("rpr swaps to its complement when train and test swap") {
    Rng rng(89);
    const Table train = testutil::random_mixed_table(rng, 25, 2, 1);
    const Table test = testutil::random_mixed_table(rng, 25, 2, 1);
    const Table synth = testutil::random_mixed_table(rng, 15, 2, 1);
    const HeomEncoder enc = HeomEncoder::fit(train);
    const auto forward = dcr_rpr(enc, train, test, synth);
    const auto backward = dcr_rpr(enc, test, train, synth);
    CHECK(forward.rpr + backward.rpr == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("dcr arrays match the brute-force oracle exactly") {
    Rng rng(97);
    const Table train = testutil::random_mixed_table(rng, 40, 2, 2);
    const Table test = testutil::random_mixed_table(rng, 20, 2, 2);
    const Table synth = testutil::random_mixed_table(rng, 30, 2, 2);
    const HeomEncoder enc = HeomEncoder::fit(train);
    const auto report = dcr_rpr(enc, train, test, synth);
    const auto oracle_train = testutil::oracle::dcr(enc.encode(train), enc.encode(synth));
    for (std::size_t i = 0; i < oracle_train.size(); ++i) CHECK(report.dcr_train[i] == oracle_train[i]);
}

TEST_CASE("cap: identical tables with unique keys give cap 1, protection 0") {
    const Table real = TableBuilder()
                           .cat("q", {"k1", "k2", "k3"}, ColumnRole::quasi_identifier)
                           .cat("s", {"a", "b", "a"}, ColumnRole::sensitive)
                           .build();
    const auto entry = cap(real, real, {"q"}, "s");
    CHECK(entry.cap == 1.0);
    CHECK(entry.protection == 0.0);
    CHECK(entry.matched_records == 3);
}

TEST_CASE("cap: uniform sensitive values within every key class give 1/k") {
    // Two key classes; synthetic sensible values balanced over 4 levels.
    std::vector<std::string> q, s;
    for (const char* key : {"k1", "k2"}) {
        for (int level = 0; level < 4; ++level) {
            for (int reps = 0; reps < 3; ++reps) {
                q.push_back(key);
                s.push_back("v" + std::to_string(level));
            }
        }
    }
    const Table synth = TableBuilder().cat("q", q).cat("s", s).build();
    const Table real = TableBuilder().cat("q", {"k1", "k2"}).cat("s", {"v0", "v3"}).build();
    const auto entry = cap(real, synth, {"q"}, "s");
    CHECK(entry.cap == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("cap: unmatched keys contribute zero (protection 1)") {
    const Table real = TableBuilder().cat("q", {"k9"}).cat("s", {"a"}).build();
    const Table synth = TableBuilder().cat("q", {"k1"}).cat("s", {"a"}).build();
    const auto entry = cap(real, synth, {"q"}, "s");
    CHECK(entry.cap == 0.0);
    CHECK(entry.protection == 1.0);
    CHECK(entry.matched_records == 0);
}

TEST_CASE("cap is invariant under row permutation of either table") {
    Rng rng(101);
    const Table real = testutil::random_mixed_table(rng, 30, 0, 3);
    const Table synth = testutil::random_mixed_table(rng, 40, 0, 3);
    const auto base = cap(real, synth, {"c0", "c1"}, "c2");
    auto perm = rng.permutation(real.rows());
    const Table real_shuffled = real.take_rows(perm);
    perm = rng.permutation(synth.rows());
    const Table synth_shuffled = synth.take_rows(perm);
    const auto shuffled = cap(real_shuffled, synth_shuffled, {"c0", "c1"}, "c2");
    CHECK(base.cap == doctest::Approx(shuffled.cap).epsilon(1e-12));
}

TEST_CASE("cap rejects numeric columns") {
    Rng rng(103);
    const Table t = testutil::random_mixed_table(rng, 10, 1, 2);
    CHECK_THROWS_AS(cap(t, t, {"n0"}, "c0"), Error);
    try {
        cap(t, t, {"c0"}, "n0");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_categorical_sensitive);
    }
}

TEST_CASE("cap report medians the per-attribute protections") {
    Rng rng(107);
    const Table real = testutil::random_mixed_table(rng, 25, 0, 4);
    const Table synth = testutil::random_mixed_table(rng, 25, 0, 4);
    const auto report = cap_report(real, synth, {"c0"}, {"c1", "c2", "c3"});
    REQUIRE(report.entries.size() == 3);
    REQUIRE(report.median_protection.has_value());
    std::vector<double> prot;
    for (const auto& e : report.entries) prot.push_back(e.protection);
    std::sort(prot.begin(), prot.end());
    CHECK(*report.median_protection == prot[1]);
}

TEST_CASE("aia classification: 1-NN attacker is perfect when synth equals eval") {
    Rng rng(109);
    // Distinct quasi-identifier rows so each eval row finds itself.
    std::vector<double> q1(30), q2(30);
    std::vector<std::string> target(30);
    for (std::size_t i = 0; i < 30; ++i) {
        q1[i] = static_cast<double>(i);
        q2[i] = static_cast<double>((i * 13) % 30);
        target[i] = "t" + std::to_string(i % 3);
    }
    const Table t = TableBuilder().num("q1", q1).num("q2", q2).cat("y", target).build();
    const auto entry = aia_classification(t, t, {"q1", "q2"}, "y");
    CHECK(entry.score == 1.0);
    CHECK_FALSE(entry.degenerate);
}

TEST_CASE("aia classification: independent target stays near chance") {
    Rng rng(113);
    const std::size_t n = 1000;
    std::vector<double> q(n);
    std::vector<std::string> y_synth(n), y_eval(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = rng.uniform();
        y_synth[i] = rng.below(2) ? "a" : "b";
        y_eval[i] = rng.below(2) ? "a" : "b";
    }
    const Table synth = TableBuilder().num("q", q).cat("y", y_synth).build();
    const Table eval = TableBuilder().num("q", q).cat("y", y_eval).build();
    const auto entry = aia_classification(synth, eval, {"q"}, "y");
    const double sigma = std::sqrt(0.25 / static_cast<double>(n));
    CHECK(std::abs(entry.score - 0.5) <= 3.0 * sigma);
}

TEST_CASE("aia classification: single-level target is flagged degenerate") {
    const Table t = TableBuilder().num("q", {1, 2, 3}).cat("y", {"only", "only", "only"}).build();
    const auto entry = aia_classification(t, t, {"q"}, "y");
    CHECK(entry.degenerate);
    CHECK(entry.score == 1.0);
}

TEST_CASE("aia regression: exact linear target gives R^2 = 1") {
    Rng rng(127);
    const std::size_t n = 50;
    std::vector<double> q(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = rng.uniform() * 10.0;
        y[i] = 3.0 * q[i] - 2.0;
    }
    const Table t = TableBuilder().num("q", q).num("y", y).build();
    const auto entry = aia_regression(t, t, {"q"}, "y");
    CHECK(entry.score == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(entry.rmse.has_value());
    CHECK(*entry.rmse == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("aia regression: pure-noise target has near-zero R^2") {
    Rng rng(131);
    const std::size_t n = 1000;
    std::vector<double> q(n), y_synth(n), y_eval(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = rng.uniform();
        y_synth[i] = rng.gaussian();
        y_eval[i] = rng.gaussian();
    }
    const Table synth = TableBuilder().num("q", q).num("y", y_synth).build();
    const Table eval = TableBuilder().num("q", q).num("y", y_eval).build();
    const auto entry = aia_regression(synth, eval, {"q"}, "y");
    CHECK(entry.score <= 0.05);
}

TEST_CASE("aia regression: constant target is an error") {
    const Table t = TableBuilder().num("q", {1, 2, 3}).num("y", {5, 5, 5}).build();
    try {
        aia_regression(t, t, {"q"}, "y");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::zero_variance_target);
    }
}

TEST_CASE("aia regression internal consistency: R^2 = 1 - RMSE^2 n / SS_tot") {
    Rng rng(137);
    const std::size_t n = 200;
    std::vector<double> q(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = rng.uniform();
        y[i] = q[i] + 0.3 * rng.gaussian();
    }
    const Table t = TableBuilder().num("q", q).num("y", y).build();
    const auto entry = aia_regression(t, t, {"q"}, "y");
    const double mean_y = mean_of(y);
    double ss_tot = 0.0;
    for (double v : y) ss_tot += (v - mean_y) * (v - mean_y);
    REQUIRE(entry.rmse.has_value());
    const double reconstructed = 1.0 - (*entry.rmse) * (*entry.rmse) * static_cast<double>(n) / ss_tot;
    CHECK(entry.score == doctest::Approx(reconstructed).epsilon(1e-12));
}

TEST_CASE("l_diversity counting") {
    SUBCASE("singleton groups") {
        const Table t = TableBuilder().cat("q", {"k1", "k2", "k3"}).cat("s", {"a", "b", "c"}).build();
        const auto entry = l_diversity(t, {"q"}, "s");
        CHECK(entry.groups == 3);
        CHECK(entry.min_distinct == 1);
        CHECK(entry.mean_distinct == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("one group holding all levels") {
        const Table t = TableBuilder().cat("q", {"k", "k", "k"}).cat("s", {"a", "b", "c"}).build();
        const auto entry = l_diversity(t, {"q"}, "s");
        CHECK(entry.groups == 1);
        CHECK(entry.min_distinct == 3);
    }
    SUBCASE("mixed group sizes") {
        const Table t = TableBuilder()
                            .cat("q", {"k1", "k2", "k2", "k2"})
                            .cat("s", {"a", "a", "b", "c"})
                            .build();
        const auto entry = l_diversity(t, {"q"}, "s");
        CHECK(entry.min_distinct == 1);
        CHECK(entry.mean_distinct == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("numeric sensitive is rejected") {
        const Table t = TableBuilder().cat("q", {"k"}).num("y", {1.0}).build();
        CHECK_THROWS_AS(l_diversity(t, {"q"}, "y"), Error);
    }
}
