#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "routecal/errors.hpp"
#include "routecal/metrics.hpp"
#include "routecal/rng.hpp"

using namespace routecal;

namespace {

std::vector<Outcome> draw_calibrated(std::size_t n, std::uint64_t seed) {
    auto rng = derive_stream(seed, 0);
    std::vector<Outcome> s(n);
    for (auto& o : s) {
        o.confidence = 0.5 + 0.5 * rng.uniform();
        o.correct = rng.bernoulli(o.confidence);
    }
    return s;
}

std::vector<oracle::Sample> to_oracle(const std::vector<Outcome>& s) {
    std::vector<oracle::Sample> out;
    for (const auto& o : s) out.push_back({o.confidence, o.correct});
    return out;
}

}  // namespace

TEST_CASE("ece hand examples") {
    CHECK(ece(std::vector<Outcome>{{0.9, true}}) == doctest::Approx(0.1));
    const std::vector<Outcome> four{{0.9, true}, {0.9, false}, {0.6, true}, {0.6, true}};
    CHECK(ece(four) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(ece(std::vector<Outcome>{{0.5, true}, {0.5, false}, {1.0, true}}) == 0.0);
    CHECK_THROWS_AS(ece(std::vector<Outcome>{}), InputError);
    CHECK_THROWS_AS(ece(std::vector<Outcome>{{1.2, true}}), InputError);
}

TEST_CASE("ece with one bin is the global gap") {
    const auto s = draw_calibrated(500, 11);
    double acc = 0.0;
    double conf = 0.0;
    for (const auto& o : s) {
        acc += o.correct;
        conf += o.confidence;
    }
    CHECK(ece(s, {1, BinScheme::EqualWidth, 0}) == doctest::Approx(std::abs(acc - conf) / 500.0).epsilon(1e-12));
}

TEST_CASE("ece matches the brute-force oracle, including bin edges") {
    auto rng = derive_stream(2, 0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Outcome> s(1 + rng.below(40));
        for (auto& o : s) {
            // Every third draw sits exactly on a bin edge.
            o.confidence = rng.below(3) == 0 ? static_cast<double>(rng.below(16)) / 15.0 : rng.uniform();
            o.correct = rng.bernoulli(0.6);
        }
        CHECK(ece(s) == oracle::ece(to_oracle(s)));
        CHECK(ece(s, {7, BinScheme::EqualWidth, 0}) == oracle::ece(to_oracle(s), 7));
    }
}

TEST_CASE("equal-width bins are half-open with the last bin closed") {
    CHECK(equal_width_bin(0.0, 15) == 0);
    CHECK(equal_width_bin(1.0, 15) == 14);
    for (std::size_t b = 1; b < 15; ++b) {
        const double edge = static_cast<double>(b) / 15.0;
        CHECK(equal_width_bin(edge, 15) == b);
        CHECK(equal_width_bin(std::nextafter(edge, 0.0), 15) == b - 1);
    }
}

TEST_CASE("equal-mass bins") {
    std::vector<Outcome> s;
    for (int i = 0; i < 17; ++i) s.push_back({0.05 * i, i % 2 == 0});
    const auto bins = reliability_bins(s, {5, BinScheme::EqualMass, 0});
    REQUIRE(bins.size() == 5);
    CHECK(bins[0].n == 4);
    CHECK(bins[1].n == 4);
    CHECK(bins[2].n == 3);
    CHECK(bins[4].n == 3);
    std::size_t total = 0;
    for (const auto& b : bins) total += b.n;
    CHECK(total == 17);
}

TEST_CASE("mce") {
    std::vector<Outcome> five(5, Outcome{0.9, true});
    five[0].correct = false;
    five[1].correct = false;
    CHECK(mce(five) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(mce(std::vector<Outcome>(4, Outcome{0.9, false})) == 0.0);
    CHECK(mce(std::vector<Outcome>{{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}}) ==
          0.0);
}

TEST_CASE("tertile split") {
    std::vector<double> rho;
    for (int i = 0; i < 100; ++i) rho.push_back(i);
    const auto t = tertile_split(rho);
    CHECK(t.q_low == doctest::Approx(oracle::quantile7(rho, 0.33)));
    CHECK(t.q_high == doctest::Approx(oracle::quantile7(rho, 0.67)));
    CHECK(t.low.size() + t.mid.size() + t.high.size() == 100);
    for (auto i : t.low) CHECK(rho[i] <= t.q_low);
    for (auto i : t.mid) CHECK_UNARY(rho[i] > t.q_low && rho[i] <= t.q_high);
    for (auto i : t.high) CHECK(rho[i] > t.q_high);
    CHECK_THROWS_AS(tertile_split(std::vector<double>(9, 0.4)), ComputeError);
}

TEST_CASE("worst tertile") {
    std::vector<Outcome> s;
    std::vector<double> rho;
    for (int i = 0; i < 300; ++i) {
        s.push_back({0.5, i % 2 == 0});
        rho.push_back(i);
    }
    const auto calibrated = worst_tertile_ece(s, rho);
    CHECK(calibrated.worst == doctest::Approx(0.0).epsilon(1e-2));

    for (int i = 200; i < 300; ++i) s[i].correct = false;
    const auto w = worst_tertile_ece(s, rho);
    CHECK(w.worst == *std::max_element(w.per_tertile.begin(), w.per_tertile.end()));
    CHECK(w.worst == w.per_tertile[2]);
    CHECK(w.per_tertile[2] == doctest::Approx(0.5).epsilon(0.05));
    CHECK_THROWS(worst_tertile_ece(std::vector<Outcome>(2, Outcome{0.5, true}), std::vector<double>{0, 1}));
}

TEST_CASE("classwise ece") {
    const std::vector<std::vector<double>> p{{0.8, 0.2}};
    const std::vector<std::size_t> y{0};
    CHECK(classwise_ece(p, y) == doctest::Approx(0.2).epsilon(1e-14));
    const std::vector<std::vector<double>> onehot{{1, 0}, {0, 1}};
    CHECK(classwise_ece(onehot, std::vector<std::size_t>{0, 1}) == 0.0);
}

TEST_CASE("smooth ece") {
    const auto s = draw_calibrated(10000, 4);
    const auto fixed = smooth_ece(s);
    CHECK(fixed.value < 0.02);
    CHECK(fixed.value >= 0.0);

    std::vector<Outcome> off;
    for (int i = 0; i < 1000; ++i) off.push_back({0.9, i % 5 < 2});
    CHECK(smooth_ece(off, 1e-3).value == doctest::Approx(0.5).epsilon(1e-6));

    auto shuffled = s;
    std::reverse(shuffled.begin(), shuffled.end());
    auto rng = derive_stream(1, 1);
    rng.shuffle(std::span<Outcome>(shuffled));
    const auto again = smooth_ece(shuffled);
    CHECK(again.value == doctest::Approx(fixed.value).epsilon(1e-12));
    CHECK(again.sigma == doctest::Approx(fixed.sigma).epsilon(1e-12));
}

TEST_CASE("nll, brier, accuracy") {
    const std::vector<std::vector<double>> p{{0.8, 0.2}};
    const std::vector<std::size_t> y{0};
    CHECK(nll(p, y) == doctest::Approx(0.22314).epsilon(1e-5));
    CHECK(brier(p, y) == doctest::Approx(0.08).epsilon(1e-14));
    const std::vector<std::vector<double>> hot{{0, 1}};
    const std::vector<std::size_t> y1{1};
    CHECK(nll(hot, y1) == 0.0);
    CHECK(brier(hot, y1) == 0.0);
    CHECK(acc1(hot, y1) == 1.0);
    CHECK(nll(std::vector<std::vector<double>>{{0.25, 0.25, 0.25, 0.25}}, std::vector<std::size_t>{3}) ==
          doctest::Approx(std::log(4.0)));
    CHECK(nll(hot, std::vector<std::size_t>{0}) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("evaluate_metrics agrees with the individual metrics") {
    auto rng = derive_stream(8, 0);
    std::vector<std::vector<double>> p;
    std::vector<std::size_t> y;
    std::vector<double> rho;
    for (int i = 0; i < 600; ++i) {
        p.push_back(oracle::softmax({2.0 * rng.normal(), 2.0 * rng.normal(), 0.0}));
        y.push_back(rng.below(3));
        rho.push_back(rng.uniform());
    }
    const auto r = evaluate_metrics(p, y, std::span<const double>(rho));
    const auto o = outcomes(p, y);
    CHECK(r.ece == ece(o));
    CHECK(r.adaece == ece(o, {15, BinScheme::EqualMass, 0}));
    CHECK(r.mce == mce(o));
    CHECK(r.nll == nll(p, y));
    CHECK(r.acc1 == acc1(p, y));
    REQUIRE(r.worst_tertile_ece.has_value());
    CHECK(*r.worst_tertile_ece == std::max({(*r.per_tertile_ece)[0], (*r.per_tertile_ece)[1], (*r.per_tertile_ece)[2]}));
    CHECK_FALSE(evaluate_metrics(p, y).worst_tertile_ece.has_value());
}
