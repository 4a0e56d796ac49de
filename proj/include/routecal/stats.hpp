#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace routecal {

double mean(std::span<const double> values);

/// Sample (n-1) standard deviation; 0 for fewer than two values.
double sample_std(std::span<const double> values);

/// Linear interpolation between order statistics (Hyndman-Fan type 7,
/// numpy's default). `p` in [0, 1]. Input need not be sorted.
double quantile(std::span<const double> values, double p);
double quantile_sorted(std::span<const double> sorted, double p);

/// Nearest-rank percentile: sorted[ceil(p * n) - 1], sorted[0] for p = 0.
double nearest_rank(std::span<const double> sorted, double p);

/// Average ranks (1-based), ties share their mean rank.
std::vector<double> ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

struct SpearmanResult {
    double rho = 0.0;
    /// Two-sided p-value from the t approximation with n-2 degrees of freedom.
    double p_value = 1.0;
};

SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

struct ScalarMinimum {
    double x = 0.0;
    double value = 0.0;
    std::size_t iterations = 0;
};

/// Golden-section search for the minimum of a unimodal function on [lo, hi],
/// stopping when the bracket is narrower than `tol`.
ScalarMinimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tol);

/// Nondecreasing weighted least-squares fit of `values` (pool adjacent
/// violators). Returns one fitted value per input.
std::vector<double> pava(std::span<const double> values, std::span<const double> weights);

}  // namespace routecal
