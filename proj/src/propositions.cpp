#include "routecal/propositions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "routecal/errors.hpp"
#include "routecal/kernel.hpp"
#include "routecal/rng.hpp"

namespace routecal {

Prop1Result check_prop1(std::span<const JointAtom> joint) {
    if (joint.empty()) throw InputError("prop1: empty joint");
    double total = 0.0;
    for (const auto& a : joint) {
        if (!(a.mass >= 0.0)) throw InputError("prop1: negative mass");
        total += a.mass;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("prop1: masses do not sum to 1");

    // (mass, mass * t) per conditioning cell.
    std::map<double, std::pair<double, double>> by_c;
    std::map<std::pair<double, double>, std::pair<double, double>> by_cr;
    for (const auto& a : joint) {
        auto& x = by_c[a.c];
        x.first += a.mass;
        x.second += a.mass * a.t;
        auto& y = by_cr[{a.c, a.r}];
        y.first += a.mass;
        y.second += a.mass * a.t;
    }
    const auto eta_c = [&](double c) {
        const auto& x = by_c.at(c);
        return x.first > 0.0 ? x.second / x.first : 0.0;
    };
    const auto eta_cr = [&](double c, double r) {
        const auto& y = by_cr.at({c, r});
        return y.first > 0.0 ? y.second / y.first : 0.0;
    };
    Prop1Result out;
    double risk_c = 0.0;
    double risk_cr = 0.0;
    for (const auto& a : joint) {
        const double ec = eta_c(a.c);
        const double ecr = eta_cr(a.c, a.r);
        risk_c += a.mass * (a.t - ec) * (a.t - ec);
        risk_cr += a.mass * (a.t - ecr) * (a.t - ecr);
        out.explained += a.mass * (ecr - ec) * (ecr - ec);
    }
    out.gain = risk_c - risk_cr;
    return out;
}

Prop2Result check_prop2(std::span<const double> eta, double pi) {
    if (eta.size() < 2) throw InputError("prop2: at least two groups are required");
    Prop2Result out;
    for (double e : eta) out.mismatch = std::max(out.mismatch, std::abs(pi - e));
    const auto [lo, hi] = std::minmax_element(eta.begin(), eta.end());
    out.lower_bound = 0.5 * (*hi - *lo);
    out.holds = out.mismatch >= out.lower_bound;
    return out;
}

double prop4_analytic(const TwoGroupSpec& spec) {
    return (spec.f_minus - spec.f_plus) * std::tanh(spec.d * spec.d / (4.0 * spec.h * spec.h));
}

namespace {

void check_spec(const TwoGroupSpec& spec) {
    if (!(spec.d > 0.0) || !(spec.h > 0.0)) throw InputError("prop4: d and h must be positive");
    if (!(spec.f_minus >= 0.0 && spec.f_minus <= 1.0 && spec.f_plus >= 0.0 && spec.f_plus <= 1.0)) {
        throw InputError("prop4: conditional means must lie in [0, 1]");
    }
}

double gap_of(const KernelModel& model, double d) {
    return nw_predict(model, -0.5 * d) - nw_predict(model, 0.5 * d);
}

}  // namespace

double prop4_point_mass(const TwoGroupSpec& spec) {
    check_spec(spec);
    const std::vector<double> r = {-0.5 * spec.d, 0.5 * spec.d};
    const std::vector<double> t = {spec.f_minus, spec.f_plus};
    const auto model = nw_fit_fixed(r, {}, t, spec.h, 1.0);
    return gap_of(model, spec.d);
}

double prop4_sampled(const TwoGroupSpec& spec, std::uint64_t seed, std::uint64_t stream) {
    check_spec(spec);
    if (spec.n == 0) throw InputError("prop4: n must be positive");
    auto rng = derive_stream(seed, stream);
    std::vector<double> r;
    std::vector<double> t;
    for (std::size_t i = 0; i < spec.n; ++i) {
        r.push_back(-0.5 * spec.d);
        t.push_back(rng.bernoulli(spec.f_minus) ? 1.0 : 0.0);
        r.push_back(0.5 * spec.d);
        t.push_back(rng.bernoulli(spec.f_plus) ? 1.0 : 0.0);
    }
    const auto model = nw_fit_fixed(r, {}, t, spec.h, 1.0);
    return gap_of(model, spec.d);
}

Prop4Result check_prop4(const TwoGroupSpec& spec, std::uint64_t seed) {
    return {prop4_analytic(spec), prop4_point_mass(spec), prop4_sampled(spec, seed, streams::kSynthetic)};
}

}  // namespace routecal
