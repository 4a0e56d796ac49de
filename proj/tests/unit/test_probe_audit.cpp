#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "routecal/errors.hpp"
#include "routecal/probe.hpp"
#include "routecal/rng.hpp"
#include "routecal/stats.hpp"
#include "routecal/synthetic.hpp"

using namespace routecal;

namespace {

FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
    FeatureMatrix x{rows, cols, std::vector<double>(rows * cols)};
    for (auto& v : x.values) v = rng.normal();
    return x;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

}  // namespace

TEST_CASE("probe target") {
    PredictionRecord r;
    r.logits = {std::log(9.0), 0.0};
    r.label = 0;
    CHECK(probe_target(r) == doctest::Approx(0.1));
    r.label = 1;
    CHECK(probe_target(r) == doctest::Approx(0.9));
    r.logits = {0.0, 0.0, 0.0};
    r.label = 2;
    CHECK(probe_target(r) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ridge") {
    auto rng = derive_stream(1, 0);
    const auto x = random_matrix(200, 3, rng);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = 0.7 + 1.5 * x.at(i, 0) - 2.0 * x.at(i, 1) + 0.25 * x.at(i, 2);
    const auto m = fit_ridge(x, y, 1e-8);
    CHECK(std::abs(m.intercept - 0.7) < 1e-6);
    CHECK(std::abs(m.weights[0] - 1.5) < 1e-6);
    CHECK(std::abs(m.weights[1] + 2.0) < 1e-6);
    CHECK(std::abs(m.weights[2] - 0.25) < 1e-6);

    const FeatureMatrix none{4, 0, {}};
    const std::vector<double> y4{1, 2, 3, 6};
    CHECK(fit_ridge(none, y4, 1e-3).intercept == doctest::Approx(3.0));

    // Stacking the rows twice doubles X'X and X'y, which equals halving lambda.
    const FeatureMatrix small{3, 2, {1, 2, 0.5, -1, 3, 0}};
    const std::vector<double> ys{1, 0, 2};
    FeatureMatrix twice{6, 2, small.values};
    twice.values.insert(twice.values.end(), small.values.begin(), small.values.end());
    std::vector<double> yt(ys);
    yt.insert(yt.end(), ys.begin(), ys.end());
    const auto a = fit_ridge(twice, yt, 0.4);
    const auto b = fit_ridge(small, ys, 0.2);
    CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-12));
    for (std::size_t j = 0; j < 2; ++j) CHECK(a.weights[j] == doctest::Approx(b.weights[j]).epsilon(1e-12));

    // A zero column with no penalty leaves the system singular.
    const FeatureMatrix zero{3, 1, {0, 0, 0}};
    CHECK_THROWS_AS(fit_ridge(zero, ys, 0.0), InputError);
}

TEST_CASE("mlp gradient matches central differences") {
    auto rng = derive_stream(2, 0);
    const auto x = random_matrix(30, 4, rng);
    std::vector<double> y(30);
    for (auto& v : y) v = rng.uniform();
    for (int point = 0; point < 10; ++point) {
        auto model = init_mlp(4, 16, rng);
        const auto analytic = mlp_gradient(model, x, y);
        const auto numeric = oracle::finite_difference(
            [&](const std::vector<double>& p) {
                auto probe = model;
                set_mlp_parameters(probe, p);
                return mlp_loss(probe, x, y);
            },
            mlp_parameters(model), 1e-6);
        CHECK(analytic.size() == model.parameter_count());
        CHECK(max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("mlp initialization bounds and parameter round trip") {
    auto rng = derive_stream(3, 0);
    const auto m = init_mlp(5, 16, rng);
    for (double w : m.w1) CHECK(std::abs(w) <= 1.0 / std::sqrt(5.0));
    for (double w : m.w2) CHECK(std::abs(w) <= 0.25);
    auto copy = m;
    auto p = mlp_parameters(m);
    for (auto& v : p) v += 1.0;
    set_mlp_parameters(copy, p);
    CHECK(mlp_parameters(copy) == p);
}

TEST_CASE("mlp fits a constant") {
    auto rng = derive_stream(4, 0);
    const auto x = random_matrix(100, 3, rng);
    const std::vector<double> y(100, 0.3);
    ProbeConfig cfg;
    auto init = derive_stream(4, 1);
    const auto m = fit_mlp(x, y, cfg, init);
    // var(y) is zero, so the bound is taken relative to the target's scale.
    CHECK(mlp_loss(m, x, y) <= 1e-2 * 0.09);
    CHECK(m.loss_history.size() == cfg.epochs);

    auto again = derive_stream(4, 1);
    const auto m2 = fit_mlp(x, y, cfg, again);
    CHECK(mlp_parameters(m) == mlp_parameters(m2));
}

TEST_CASE("mlp training reduces the loss") {
    auto rng = derive_stream(5, 0);
    const auto x = random_matrix(300, 2, rng);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i) y[i] = std::sin(x.at(i, 0)) + 0.5 * x.at(i, 1) * x.at(i, 1);
    auto init = derive_stream(5, 1);
    const auto m = fit_mlp(x, y, ProbeConfig{}, init);
    CHECK(m.loss_history.back() < 0.5 * m.loss_history.front());
}

TEST_CASE("column shuffle") {
    auto rng = derive_stream(6, 0);
    FeatureMatrix x{1000, 2, std::vector<double>(2000)};
    for (std::size_t i = 0; i < 1000; ++i) {
        const double a = rng.normal();
        x.at(i, 0) = a;
        x.at(i, 1) = 0.9 * a + std::sqrt(1 - 0.81) * rng.normal();
    }
    auto srng = derive_stream(6, 1);
    const auto s = shuffle_columns(x, 1, srng);
    std::vector<double> c0, h0, h1;
    for (std::size_t i = 0; i < 1000; ++i) {
        c0.push_back(s.at(i, 0));
        h0.push_back(x.at(i, 1));
        h1.push_back(s.at(i, 1));
        CHECK(s.at(i, 0) == x.at(i, 0));
    }
    CHECK(pearson(c0, h0) > 0.85);
    CHECK(std::abs(pearson(c0, h1)) < 0.1);
    std::vector<double> sorted0(h0), sorted1(h1);
    std::sort(sorted0.begin(), sorted0.end());
    std::sort(sorted1.begin(), sorted1.end());
    CHECK(sorted0 == sorted1);

    // Shuffling an empty block is the identity.
    const auto id = shuffle_columns(x, 2, srng);
    CHECK(id.values == x.values);
}

TEST_CASE("r squared") {
    const std::vector<double> y{1, 2, 3, 4};
    CHECK(r_squared(y, y).value == 1.0);
    CHECK(r_squared(y, std::vector<double>(4, 2.5)).value == 0.0);
    CHECK(r_squared(std::vector<double>(3, 1.0), std::vector<double>{1, 2, 3}).undefined);
}

TEST_CASE("audit report") {
    const auto planted = generate_planted(planted_preset("routing-signal", 1200, 3));
    ProbeConfig cfg;
    cfg.epochs = 60;
    const auto r = run_audit(planted.data, cfg);
    CHECK(r.train_size == 600);
    CHECK(r.test_size == 600);
    REQUIRE(r.fits.size() == 5);
    const char* names[] = {"conf-lin", "conf-mlp", "full-lin", "full-mlp", "shuf-full-mlp"};
    for (std::size_t i = 0; i < 5; ++i) CHECK(r.fits[i].name == names[i]);
    CHECK(r.fit("full-lin").train_sse <= r.fit("conf-lin").train_sse);
    CHECK(r.fit("full-mlp").r2.value > r.fit("shuf-full-mlp").r2.value);
    CHECK(r.r_std.size() == 1200);
    CHECK_THROWS(r.fit("nope"));

    cfg.threads = 4;
    const auto again = run_audit(planted.data, cfg);
    for (std::size_t i = 0; i < 5; ++i) CHECK(again.fits[i].r2.value == r.fits[i].r2.value);
}
