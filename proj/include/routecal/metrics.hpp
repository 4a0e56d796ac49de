#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace routecal {

/// Top-class confidence and whether the top class was the label.
struct Outcome {
    double confidence = 0.0;
    bool correct = false;
};

enum class BinScheme { EqualWidth, EqualMass };

struct BinningSpec {
    std::size_t bin_count = 15;
    BinScheme scheme = BinScheme::EqualWidth;
    std::size_t min_support = 0;
};

struct BinSummary {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n = 0;
    double acc = 0.0;
    double conf = 0.0;
};

/// Index of the half-open bin [b/B, (b+1)/B) holding `confidence`; the last
/// bin is closed at 1.
std::size_t equal_width_bin(double confidence, std::size_t bin_count);

/// Per-bin support, accuracy and mean confidence. Equal-mass bins are
/// contiguous blocks of the (confidence, correct)-sorted sample whose sizes
/// differ by at most one, larger blocks first.
std::vector<BinSummary> reliability_bins(std::span<const Outcome> samples, const BinningSpec& spec);

/// sum_b (n_b / n) |acc_b - conf_b|. Throws InputError on an empty sample or a
/// confidence outside [0, 1].
double ece(std::span<const Outcome> samples, const BinningSpec& spec = {});

/// Worst bin gap among bins with n_b >= spec.min_support; 0 if none qualify.
double mce(std::span<const Outcome> samples, const BinningSpec& spec = {15, BinScheme::EqualWidth, 5});

enum class Tertile : unsigned char { Low = 0, Mid = 1, High = 2 };

struct TertileSplit {
    double q_low = 0.0;
    double q_high = 0.0;
    std::vector<std::size_t> low;
    std::vector<std::size_t> mid;
    std::vector<std::size_t> high;
};

inline Tertile assign_tertile(double rho, double q_low, double q_high) {
    if (rho <= q_low) return Tertile::Low;
    if (rho <= q_high) return Tertile::Mid;
    return Tertile::High;
}

/// Cuts at the type-7 33rd and 67th percentiles of `rho`; membership by
/// rho <= q_low, q_low < rho <= q_high, rho > q_high. Throws ComputeError
/// ("degenerate tertiles") if any tertile is empty.
TertileSplit tertile_split(std::span<const double> rho);

/// Membership under fixed cuts. Does not require non-empty tertiles.
TertileSplit tertile_split(std::span<const double> rho, double q_low, double q_high);

struct WorstTertileResult {
    double worst = 0.0;
    std::array<double, 3> per_tertile{};
    TertileSplit split;
};

WorstTertileResult worst_tertile_ece(std::span<const Outcome> samples, std::span<const double> rho,
                                     const BinningSpec& spec = {});

/// Unweighted mean over classes of the ECE of (p_k, 1{y = k}).
double classwise_ece(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                     const BinningSpec& spec = {});

struct SmoothEceResult {
    double value = 0.0;
    double sigma = 0.0;
    /// False when the fixed point sigma = smECE_sigma is not bracketed by
    /// [1e-4, 1]; `value` is then the smECE at the nearer endpoint.
    bool bracketed = true;
};

/// Kernel-smoothed calibration error. The residual correct - conf is smoothed
/// with a Gaussian kernel reflected at 0 and 1 on a 200-point grid and
/// integrated in absolute value. Without `sigma`, the bandwidth is the fixed
/// point smECE_sigma = sigma found by bisection on log sigma.
SmoothEceResult smooth_ece(std::span<const Outcome> samples, std::optional<double> sigma = std::nullopt);

/// Mean -log p_y with p floored at 1e-12.
double nll(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels);
double brier(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels);
double acc1(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels);

std::vector<Outcome> outcomes(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels);

struct MetricReport {
    double ece = 0.0;
    double adaece = 0.0;
    double mce = 0.0;
    double classwise_ece = 0.0;
    double smooth_ece = 0.0;
    double smooth_ece_sigma = 0.0;
    double nll = 0.0;
    double brier = 0.0;
    double acc1 = 0.0;
    std::optional<double> worst_tertile_ece;
    std::optional<std::array<double, 3>> per_tertile_ece;
};

/// Every metric on one evaluation set. Worst-tertile fields are filled only
/// when `rho` is given.
MetricReport evaluate_metrics(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                              std::optional<std::span<const double>> rho = std::nullopt,
                              std::size_t bin_count = 15);

}  // namespace routecal
