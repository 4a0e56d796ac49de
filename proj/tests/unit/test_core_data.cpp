#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "routecal/errors.hpp"
#include "routecal/io.hpp"
#include "routecal/parallel.hpp"
#include "routecal/record.hpp"
#include "routecal/rng.hpp"
#include "routecal/split.hpp"
#include "routecal/stats.hpp"

using namespace routecal;

namespace {

PredictionRecord make(std::string id, std::vector<double> z, std::size_t label, std::vector<double> h = {}) {
    PredictionRecord r;
    r.id = std::move(id);
    r.logits = std::move(z);
    r.label = label;
    if (!h.empty()) r.entropy_profile = std::move(h);
    return r;
}

Dataset numbered(std::size_t n) {
    std::vector<PredictionRecord> recs;
    for (std::size_t i = 0; i < n; ++i) recs.push_back(make("r" + std::to_string(i), {0.1 * i, 0.0}, i % 2));
    return Dataset(std::move(recs));
}

}  // namespace

TEST_CASE("softmax_confidence") {
    auto a = softmax_confidence(std::vector<double>{0, 0});
    CHECK(a.probs[0] == 0.5);
    CHECK(a.probs[1] == 0.5);
    CHECK(a.pred == 0);
    CHECK(a.confidence == 0.5);

    auto b = softmax_confidence(std::vector<double>{2, 0});
    CHECK(b.confidence == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));
    CHECK(b.confidence == doctest::Approx(0.880797).epsilon(1e-6));

    auto c = softmax_confidence(std::vector<double>{0, 10, 0});
    CHECK(c.pred == 1);
    CHECK(c.confidence == doctest::Approx(0.99991).epsilon(1e-5));

    CHECK_THROWS_AS(softmax_confidence(std::vector<double>{1.0}), InputError);
    CHECK_THROWS_AS(softmax_confidence(std::vector<double>{1.0, NAN}), InputError);
}

TEST_CASE("softmax is stable for huge logits and matches the oracle") {
    const std::vector<double> z{1000.0, 999.0, -1000.0};
    const auto p = softmax(z);
    const auto q = oracle::softmax(z);
    for (std::size_t k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(q[k]).epsilon(1e-15));
    CHECK(argmax(std::vector<double>{1, 3, 3}) == 1);
}

TEST_CASE("dataset invariants") {
    CHECK_THROWS_AS(Dataset({make("a", {0, 1}, 2)}), InputError);
    CHECK_THROWS_AS(Dataset({make("a", {0, 1}, 0), make("b", {0, 1, 2}, 0)}), InputError);
    CHECK_THROWS_AS(Dataset({make("a", {0, 1}, 0), make("a", {0, 1}, 0)}), InputError);
    CHECK_THROWS_AS(Dataset({make("a", {0, 1}, 0, {0.5, 1.5})}), InputError);
    CHECK_THROWS_AS(Dataset({make("a", {0, 1}, 0, {0.5}), make("b", {0, 1}, 0, {0.5, 0.5})}), InputError);
    Dataset d({make("a", {0, 1}, 0, {0.2, 0.4})});
    CHECK(d.class_count() == 2);
    CHECK(d.layer_count() == 2);
    CHECK(d.has_routing());
    const auto empty = d.subset(std::vector<std::size_t>{});
    CHECK(empty.empty());
    CHECK(empty.class_count() == 2);
}

TEST_CASE("alpha wins over a supplied profile") {
    PredictionRecord r = make("a", {0, 1}, 0, {0.0});
    RoutingMatrix m;
    m.tokens = 2;
    m.positions = 1;
    m.values = {0.5, 0.5};
    r.alpha = std::vector<RoutingMatrix>{m};
    Dataset d({r});
    CHECK((*d[0].entropy_profile)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("jsonl round trip is the identity") {
    std::vector<PredictionRecord> recs;
    recs.push_back(make("x", {0.1, -2.5, 3.25}, 2, {0.1, 0.9}));
    recs.push_back(make("y", {1e-300, 7.0, -0.0}, 0, {0.3333333333333333, 0.0}));
    Dataset d(recs);
    std::stringstream ss;
    write_jsonl(ss, d);
    std::stringstream in(ss.str());
    const auto back = read_jsonl(in);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].id == d[i].id);
        CHECK(back[i].label == d[i].label);
        CHECK(back[i].logits == d[i].logits);
        CHECK(*back[i].entropy_profile == *d[i].entropy_profile);
    }
    std::stringstream again;
    write_jsonl(again, back);
    CHECK(again.str() == ss.str());
}

TEST_CASE("csv round trip is the identity") {
    Dataset d({make("x", {0.1, -2.5}, 1, {0.25, 0.75}), make("y", {4.0, 1.0 / 3.0}, 0, {0.0, 1.0})});
    std::stringstream ss;
    write_csv(ss, d);
    std::stringstream in(ss.str());
    const auto back = read_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[1].logits == d[1].logits);
    CHECK(*back[0].entropy_profile == *d[0].entropy_profile);
}

TEST_CASE("reader errors carry line numbers") {
    std::stringstream bad("{\"id\":\"a\",\"logits\":[0,1],\"label\":0}\n\n{\"id\":\"b\",\"logits\":[0,1]}\n");
    try {
        read_jsonl(bad);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(e.line() == 3);
    }
    std::stringstream garbage("{not json\n");
    CHECK_THROWS_AS(read_jsonl(garbage), InputError);
    std::stringstream csv("id,label,logit_0,logit_1\na,0,0.5,zz\n");
    try {
        read_csv(csv);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("split cardinality and determinism") {
    const auto d = numbered(10);
    auto [cal, test] = split(d, {42, 0.5});
    CHECK(cal.size() == 5);
    CHECK(test.size() == 5);
    std::set<std::string> ids;
    for (const auto& r : cal.records()) ids.insert(r.id);
    for (const auto& r : test.records()) ids.insert(r.id);
    CHECK(ids.size() == 10);

    auto [cal2, test2] = split(d, {42, 0.5});
    for (std::size_t i = 0; i < 5; ++i) CHECK(cal[i].id == cal2[i].id);

    const auto small = split_indices(3, {42, 0.5});
    CHECK(small.cal.size() == 2);
    CHECK(small.test.size() == 1);
    CHECK_THROWS_AS(split_indices(3, {42, 1.0}), InputError);
}

TEST_CASE("rng streams") {
    auto a = derive_stream(42, 0);
    auto b = derive_stream(42, 0);
    auto c = derive_stream(42, 1);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs = differs || x != c.next_u64();
    }
    CHECK(differs);

    auto u = derive_stream(7, 3);
    double m = 0.0;
    std::array<int, 5> hist{};
    for (int i = 0; i < 100000; ++i) {
        const double x = u.uniform();
        CHECK_UNARY(x >= 0.0 && x < 1.0);
        m += x;
        ++hist[u.below(5)];
    }
    CHECK(m / 100000 == doctest::Approx(0.5).epsilon(0.01));
    for (int h : hist) CHECK(h == doctest::Approx(20000).epsilon(0.03));

    auto g = derive_stream(7, 4);
    double bm = 0.0;
    for (int i = 0; i < 50000; ++i) bm += g.beta(2.0, 5.0);
    CHECK(bm / 50000 == doctest::Approx(2.0 / 7.0).epsilon(0.01));
}

TEST_CASE("stream-indexed work is independent of the worker count") {
    auto run = [](unsigned threads) {
        std::vector<double> out(257);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            auto rng = derive_stream(42, streams::kBootstrap + i);
            out[i] = rng.uniform() + rng.normal();
        });
        return out;
    };
    CHECK(run(1) == run(4));
    CHECK(run(1) == run(13));
}

TEST_CASE("stats helpers") {
    const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
    CHECK(mean(v) == doctest::Approx(31.0 / 8.0));
    for (double p : {0.0, 0.33, 0.5, 0.67, 0.975, 1.0}) {
        CHECK(quantile(v, p) == doctest::Approx(oracle::quantile7(v, p)).epsilon(1e-15));
    }
    std::vector<double> sorted(v);
    std::sort(sorted.begin(), sorted.end());
    CHECK(nearest_rank(sorted, 0.25) == 1.0);
    CHECK(nearest_rank(sorted, 0.5) == 3.0);
    CHECK(nearest_rank(sorted, 0.0) == 1.0);
    const auto r = ranks(std::vector<double>{10, 20, 10, 30});
    CHECK(r == std::vector<double>{1.5, 3, 1.5, 4});

    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> y{2, 4, 5, 4, 5};
    CHECK(pearson(x, y) == doctest::Approx(0.7745966692414834));
    const auto s = spearman(x, std::vector<double>{1, 4, 9, 16, 25});
    CHECK(s.rho == doctest::Approx(1.0));

    const auto m = golden_section([](double t) { return (t - 1.3) * (t - 1.3); }, -4, 4, 1e-9);
    CHECK(m.x == doctest::Approx(1.3).epsilon(1e-7));
}

TEST_CASE("pava small cases") {
    CHECK(pava(std::vector<double>{1, 0}, std::vector<double>{1, 1}) == std::vector<double>{0.5, 0.5});
    CHECK(pava(std::vector<double>{0, 1}, std::vector<double>{1, 1}) == std::vector<double>{0, 1});
    const auto w = pava(std::vector<double>{1, 0}, std::vector<double>{3, 1});
    CHECK(w[0] == doctest::Approx(0.75));
    CHECK(w[1] == doctest::Approx(0.75));
}
