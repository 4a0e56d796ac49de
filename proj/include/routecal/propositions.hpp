#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace routecal {

/// One support point of a discrete joint over (confidence, routing feature,
/// correctness). `t` is 0 or 1.
struct JointAtom {
    double c = 0.0;
    double r = 0.0;
    double t = 0.0;
    double mass = 0.0;
};

struct Prop1Result {
    /// E[(T - eta_c)^2] - E[(T - eta_cr)^2].
    double gain = 0.0;
    /// E[(eta_cr - eta_c)^2].
    double explained = 0.0;
};

/// Exact enumeration. Atoms sharing c (resp. (c, r)) exactly form one
/// conditioning cell. Throws InputError unless masses are nonnegative and
/// sum to 1 within 1e-9.
Prop1Result check_prop1(std::span<const JointAtom> joint);

struct Prop2Result {
    /// max_g |pi - eta_g|.
    double mismatch = 0.0;
    /// (max_g eta_g - min_g eta_g) / 2.
    double lower_bound = 0.0;
    bool holds = true;
};

/// Needs at least two groups.
Prop2Result check_prop2(std::span<const double> eta, double pi);

struct TwoGroupSpec {
    double d = 1.0;
    double f_minus = 1.0;
    double f_plus = 0.0;
    double h = 0.5;
    std::size_t n = 1000;
};

/// (f_minus - f_plus) * tanh(d^2 / (4 h^2)).
double prop4_analytic(const TwoGroupSpec& spec);

/// 1-D Nadaraya-Watson gap g(-d/2) - g(d/2) fitted on two point masses with
/// targets f_minus and f_plus.
double prop4_point_mass(const TwoGroupSpec& spec);

/// Same estimator on n Bernoulli(f) draws at each group location.
double prop4_sampled(const TwoGroupSpec& spec, std::uint64_t seed, std::uint64_t stream);

struct Prop4Result {
    double analytic = 0.0;
    double point_mass = 0.0;
    double sampled = 0.0;
};

Prop4Result check_prop4(const TwoGroupSpec& spec, std::uint64_t seed = 42);

}  // namespace routecal
