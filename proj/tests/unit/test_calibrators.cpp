#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "routecal/binning.hpp"
#include "routecal/calibrator.hpp"
#include "routecal/errors.hpp"
#include "routecal/kernel.hpp"
#include "routecal/metrics.hpp"
#include "routecal/rcmmc.hpp"
#include "routecal/record.hpp"
#include "routecal/rng.hpp"
#include "routecal/stats.hpp"
#include "routecal/temperature.hpp"

using namespace routecal;

namespace {

struct Logits {
    std::vector<std::vector<double>> z;
    std::vector<std::size_t> y;
};

// Rows whose binary probabilities are a / (a + b), replicated a and b times
// with labels 0 and 1, so the empirical NLL is the expected NLL and tau = 1
// is its exact minimizer.
Logits exact_binary(double scale) {
    Logits out;
    for (auto [a, b] : {std::pair{3, 1}, std::pair{1, 1}, std::pair{9, 1}, std::pair{1, 4}, std::pair{7, 3}}) {
        const std::vector<double> z{scale * std::log(static_cast<double>(a) / b), 0.0};
        for (int i = 0; i < a; ++i) {
            out.z.push_back(z);
            out.y.push_back(0);
        }
        for (int i = 0; i < b; ++i) {
            out.z.push_back(z);
            out.y.push_back(1);
        }
    }
    return out;
}

// Overconfident K-class data: labels drawn from softmax(z / 2).
Logits overconfident(std::size_t n, std::size_t k, std::uint64_t seed) {
    auto rng = derive_stream(seed, 0);
    Logits out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z(k);
        for (auto& v : z) v = 3.0 * rng.normal();
        const auto p = oracle::softmax(z, 2.0);
        double u = rng.uniform();
        std::size_t y = 0;
        while (y + 1 < k && u >= p[y]) u -= p[y++];
        out.z.push_back(z);
        out.y.push_back(y);
    }
    return out;
}

CalibrationSet as_set(const Logits& l, std::vector<double> route = {}) {
    CalibrationSet s{l.z, l.y, std::move(route)};
    if (s.route.empty()) {
        for (std::size_t i = 0; i < l.z.size(); ++i) s.route.push_back(static_cast<double>(i % 7) / 7.0);
    }
    return s;
}

}  // namespace

TEST_CASE("temperature scaling") {
    const auto exact = exact_binary(1.0);
    const auto m = fit_temperature(exact.z, exact.y);
    CHECK(m.tau == doctest::Approx(1.0).epsilon(1e-3));
    CHECK_FALSE(m.at_boundary);
    const auto doubled = exact_binary(2.0);
    CHECK(fit_temperature(doubled.z, doubled.y).tau == doctest::Approx(2.0).epsilon(1e-3));

    Logits easy;
    for (int i = 0; i < 20; ++i) {
        easy.z.push_back({50.0, 0.0});
        easy.y.push_back(0);
    }
    CHECK(fit_temperature(easy.z, easy.y).at_boundary);

    auto twice = exact;
    twice.z.insert(twice.z.end(), exact.z.begin(), exact.z.end());
    twice.y.insert(twice.y.end(), exact.y.begin(), exact.y.end());
    CHECK(fit_temperature(twice.z, twice.y).tau == doctest::Approx(m.tau).epsilon(1e-9));
    CHECK_THROWS_AS(fit_temperature(LogitRows{}, std::span<const std::size_t>{}), InputError);
}

TEST_CASE("vector scaling") {
    const auto data = overconfident(400, 3, 5);
    VectorScalingModel identity{{1, 1, 1}, {0, 0, 0}, 0, 0.0};
    CHECK(apply_vector_scaling(identity, data.z[0]) == softmax(data.z[0]));
    const auto fitted = fit_vector_scaling(data.z, data.y);
    CHECK(vector_scaling_nll(data.z, data.y, fitted) <= vector_scaling_nll(data.z, data.y, identity));

    // Relabel classes by the bijection k -> (k + 1) mod 3.
    Logits permuted = data;
    for (std::size_t i = 0; i < data.z.size(); ++i) {
        for (std::size_t k = 0; k < 3; ++k) permuted.z[i][(k + 1) % 3] = data.z[i][k];
        permuted.y[i] = (data.y[i] + 1) % 3;
    }
    const auto p = fit_vector_scaling(permuted.z, permuted.y);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(p.w[(k + 1) % 3] == doctest::Approx(fitted.w[k]).epsilon(1e-6));
        CHECK(p.b[(k + 1) % 3] - p.b[0] == doctest::Approx(fitted.b[k] - fitted.b[2]).epsilon(1e-5));
    }
}

TEST_CASE("classwise temperature keeps the argmax") {
    const auto data = overconfident(600, 4, 6);
    const auto m = fit_classwise_ts(data.z, data.y);
    REQUIRE(m.tau.size() == 4);
    for (double t : m.tau) CHECK(t > 1.0);
    for (const auto& z : data.z) CHECK(argmax(apply_classwise_ts(m, z)) == argmax(z));
}

TEST_CASE("histogram binning and isotonic") {
    std::vector<Outcome> cal;
    for (int i = 0; i < 10; ++i) cal.push_back({0.5 + 0.01 * i, i < 7});
    const auto hb = fit_histogram_binning(cal, 1);
    for (const auto& o : cal) CHECK(histogram_binning_map(hb, o.confidence) == doctest::Approx(0.7));

    const auto iso = fit_isotonic(std::vector<Outcome>{{0.6, true}, {0.7, false}});
    CHECK(isotonic_map(iso, 0.6) == 0.5);
    CHECK(isotonic_map(iso, 0.7) == 0.5);
    const auto mono = fit_isotonic(std::vector<Outcome>{{0.6, false}, {0.7, true}});
    CHECK(isotonic_map(mono, 0.6) == 0.0);
    CHECK(isotonic_map(mono, 0.7) == 1.0);
    CHECK(isotonic_map(mono, 0.1) == 0.0);

    // Tied confidences are pooled before the fit.
    const auto tied = fit_isotonic(std::vector<Outcome>{{0.6, true}, {0.6, false}, {0.6, false}, {0.9, true}});
    CHECK(isotonic_map(tied, 0.6) == doctest::Approx(1.0 / 3.0));

    const auto p = rescale_top(std::vector<double>{0.6, 0.3, 0.1}, 0.8);
    CHECK(p[0] == 0.8);
    CHECK(p[1] == doctest::Approx(0.15));
    CHECK(p[2] == doctest::Approx(0.05));
}

TEST_CASE("isotonic fit equals the exhaustive least-squares fit") {
    auto rng = derive_stream(12, 0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(8);
        std::vector<Outcome> cal(n);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            cal[i] = {0.5 + 0.05 * static_cast<double>(i), rng.bernoulli(0.5)};
            y[i] = cal[i].correct;
        }
        const auto model = fit_isotonic(cal);
        const auto ref = oracle::exhaustive_isotonic(y);
        for (std::size_t i = 0; i < n; ++i) CHECK(isotonic_map(model, cal[i].confidence) == doctest::Approx(ref[i]));
    }
}

TEST_CASE("lc") {
    const auto data = overconfident(300, 3, 7);
    const auto m = fit_lc(data.z, data.y);
    std::vector<double> z3(data.z[0]);
    for (auto& v : z3) v *= 3.0;
    const auto a = apply_lc(m, data.z[0]);
    const auto b = apply_lc(m, z3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-14));
    CHECK(fit_lc(data.z, data.y).tau == m.tau);

    auto ece_at = [&](double tau) {
        std::vector<std::vector<double>> probs;
        for (const auto& z : data.z) probs.push_back(apply_lc(LcModel{tau}, z));
        return ece(outcomes(probs, data.y));
    };
    CHECK(ece_at(m.tau) <= ece_at(1.0));
    CHECK_THROWS_AS(apply_lc(m, std::vector<double>{0, 0, 0}), InputError);
}

TEST_CASE("rcmmc") {
    const auto data = overconfident(2000, 3, 9);
    const auto one = fit_rcmmc(data.z, data.y, 1, 1);
    CHECK(one.tau[0] == fit_temperature(data.z, data.y).tau);

    const auto m = fit_rcmmc(data.z, data.y);
    CHECK(m.tau.size() == 32);
    for (const auto& z : data.z) CHECK(argmax(apply_rcmmc(m, z)) == argmax(z));

    // Mean calibrated confidence is nondecreasing along the margin axis.
    std::vector<double> sum(32, 0.0);
    std::vector<double> cnt(32, 0.0);
    for (const auto& z : data.z) {
        const auto cell = rcmmc_cell(m, rcmmc_position(z));
        const auto p = apply_rcmmc(m, z);
        sum[cell] += *std::max_element(p.begin(), p.end());
        cnt[cell] += 1.0;
    }
    for (std::size_t row = 0; row < 4; ++row) {
        double prev = -1.0;
        for (std::size_t col = 0; col < 8; ++col) {
            const auto c = row * 8 + col;
            if (cnt[c] == 0.0) continue;
            const double mean_conf = sum[c] / cnt[c];
            CHECK(mean_conf >= prev - 1e-7);
            prev = mean_conf;
        }
    }
    CHECK_THROWS(fit_rcmmc(LogitRows(data.z).first(10), std::span<const std::size_t>(data.y).first(10)));
}

TEST_CASE("rcmmc fills empty cells") {
    // Two distinct logit vectors repeated: most quantile cells stay empty.
    Logits l;
    for (int i = 0; i < 64; ++i) {
        l.z.push_back(i % 2 ? std::vector<double>{2.0, 0.0} : std::vector<double>{0.5, 0.0});
        l.y.push_back(i % 3 == 0);
    }
    const auto m = fit_rcmmc(l.z, l.y, 4, 2);
    CHECK(m.filled_cells > 0);
    for (double t : m.tau) CHECK_UNARY(std::isfinite(t) && t > 0.0);
}

TEST_CASE("nadaraya-watson") {
    CHECK(scott_bandwidth(1.0, 64, 2) == 0.5);
    CHECK(scott_bandwidth(2.0, 32, 1) == doctest::Approx(1.0));

    const std::vector<double> c1{0.5};
    const std::vector<double> t1{1.0};
    const auto single = nw_fit(c1, c1, t1);
    for (double q : {0.0, 0.3, 1.0}) CHECK(nw_predict(single, q, 1.0 - q) == 1.0);
    CHECK_FALSE(single.warnings.empty());

    const std::vector<double> c2{0.2, 0.8};
    const std::vector<double> r2{0.5, 0.5};
    const std::vector<double> t2{0.0, 1.0};
    const auto pair = nw_fit_fixed(c2, r2, t2, 0.1, 0.1);
    CHECK(nw_predict(pair, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    // Far from both points every weight underflows; the nearer point wins.
    CHECK(nw_predict(pair, 40.0, 0.5) == 1.0);

    // Direct weighted mean on a random problem.
    auto rng = derive_stream(13, 0);
    std::vector<double> c(50), r(50), t(50);
    for (std::size_t i = 0; i < 50; ++i) {
        c[i] = rng.uniform();
        r[i] = rng.uniform();
        t[i] = rng.bernoulli(c[i]);
    }
    const auto m = nw_fit(c, r, t, 1.5);
    CHECK(m.h_c == doctest::Approx(1.5 * scott_bandwidth(sample_std(c), 50, 2)));
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        const double w = std::exp(-0.5 * std::pow((0.4 - c[i]) / m.h_c, 2) - 0.5 * std::pow((0.6 - r[i]) / m.h_r, 2));
        num += w * t[i];
        den += w;
    }
    CHECK(nw_predict(m, 0.4, 0.6) == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("per-sample temperature solve") {
    const std::vector<double> z{2.0, 0.0};
    auto s = solve_temperature(z, 0, 1.0 / (1.0 + std::exp(-2.0)));
    CHECK(s.converged);
    CHECK(s.tau == doctest::Approx(1.0).epsilon(1e-7));
    s = solve_temperature(z, 0, 1.0 / (1.0 + std::exp(-4.0)));
    CHECK(s.tau == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(std::abs(s.achieved - 0.982014) < 1e-6);

    const std::vector<double> cc{0.9, 0.9};
    const std::vector<double> tt{0.0, 0.0};
    const auto low = nw_fit_fixed(cc, {}, tt, 0.1, 1.0);
    ClipStats stats;
    const auto p = apply_condcal(low, z, 0.0, stats);
    CHECK(stats.total == 1);
    CHECK(stats.lower == 1);
    CHECK(stats.lower_rate() == 1.0);
    CHECK(std::abs(p[0] - (0.5 + kClipEpsilon)) <= 1e-8);
    CHECK(argmax(p) == 0);

    const auto tied = apply_condcal(low, std::vector<double>{1.0, 1.0}, 0.0, stats);
    CHECK(stats.degenerate == 1);
    CHECK(tied[0] == 0.5);
}

TEST_CASE("bandwidth selection") {
    const auto data = overconfident(300, 3, 21);
    const auto set = as_set(data);
    const CondCalInputs in{set.logits, set.labels, set.route};
    CHECK(select_bandwidth(in, {BandwidthMode::ScottTimes, 2.0}, 42).multiplier == 2.0);
    CHECK(select_bandwidth(in, {BandwidthMode::FixedScott, 3.0}, 42).multiplier == 1.0);
    const auto a = select_bandwidth(in, {BandwidthMode::CvNll, 1.0}, 42);
    const auto b = select_bandwidth(in, {BandwidthMode::CvNll, 1.0}, 42);
    CHECK(a.multiplier == b.multiplier);
    CHECK(a.scores == b.scores);
    REQUIRE(a.scores.size() == 5);
    const auto best = std::min_element(a.scores.begin(), a.scores.end());
    CHECK(a.multiplier == a.grid[static_cast<std::size_t>(best - a.scores.begin())]);
    CHECK_FALSE(a.diagnostic_only);

    const auto oracle_mode = select_bandwidth(in, {BandwidthMode::OracleEce, 1.0}, 42, &in);
    CHECK(oracle_mode.diagnostic_only);
    CHECK_THROWS(select_bandwidth(in, {BandwidthMode::OracleEce, 1.0}, 42));

    // A constant route makes every multiplier score identically in r, and
    // identical logits tie across the whole grid: the smallest one wins.
    Logits flat;
    for (int i = 0; i < 40; ++i) {
        flat.z.push_back({1.0, 0.0});
        flat.y.push_back(i % 4 == 0);
    }
    const auto fs = as_set(flat, std::vector<double>(40, 0.3));
    const CondCalInputs fin{fs.logits, fs.labels, fs.route};
    CHECK(select_bandwidth(fin, {BandwidthMode::CvNll, 1.0}, 42).multiplier == 0.25);
}

TEST_CASE("calibrator front end") {
    for (auto m : all_methods()) CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS_AS(parse_method("platt"), InputError);
    CHECK(needs_routing(Method::ArCondCal));
    CHECK_FALSE(needs_routing(Method::NwPredEnt));

    const auto cal = as_set(overconfident(800, 3, 30));
    const auto test = as_set(overconfident(400, 3, 31));
    for (auto method : all_methods()) {
        CAPTURE(method_name(method));
        const auto fitted = fit_calibrator(method, cal);
        ClipStats clip;
        const auto probs = apply_calibrator(fitted, test, &clip);
        REQUIRE(probs.size() == test.logits.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            double s = 0.0;
            for (double p : probs[i]) {
                CHECK(p >= 0.0);
                s += p;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
            if (preserves_argmax(method)) CHECK(argmax(probs[i]) == argmax(test.logits[i]));
        }
        if (is_kernel(method)) CHECK(clip.total == test.logits.size());
        if (method == Method::None) CHECK(probs[0] == softmax(test.logits[0]));
    }
}
