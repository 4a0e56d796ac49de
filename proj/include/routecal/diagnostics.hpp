#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "routecal/features.hpp"
#include "routecal/metrics.hpp"
#include "routecal/record.hpp"

namespace routecal {

struct CurveBin {
    double lo = 0.0;
    double hi = 0.0;
    /// Indexed by Tertile (low, mid, high).
    std::array<std::size_t, 3> n{};
    std::array<double, 3> acc{};
    std::array<double, 3> conf{};
    std::array<bool, 3> valid{};
    /// Valid in both the low and the high tertile.
    bool shared = false;
};

struct MatchedCurves {
    double q_low = 0.0;
    double q_high = 0.0;
    std::size_t min_support = 5;
    std::vector<CurveBin> bins;

    std::size_t shared_bins() const;
};

/// Accuracy-vs-confidence tables per rho tertile over equal-width confidence
/// bins. The first overload cuts rho at its own 33rd/67th percentiles and
/// throws ComputeError on degenerate tertiles.
MatchedCurves matched_confidence_curves(std::span<const Outcome> samples, std::span<const double> rho,
                                        std::size_t bin_count = 15, std::size_t min_support = 5);
MatchedCurves matched_confidence_curves(std::span<const Outcome> samples, std::span<const double> rho,
                                        double q_low, double q_high, std::size_t bin_count = 15,
                                        std::size_t min_support = 5);

/// Largest |acc_low - acc_high| over shared bins. ComputeError when no bin is
/// shared.
double max_gap(const MatchedCurves& curves);

/// sum_c w_c |gap_c| / sum_c w_c with w_c = min(n_low, n_high) over shared
/// bins. ComputeError when no bin is shared.
double weighted_gap(const MatchedCurves& curves);

enum class GapStatistic { MaxGap, WeightedGap };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct BootstrapResult {
    std::size_t replicates = 0;
    std::size_t skipped = 0;
    /// More than half of the replicates had no shared bin.
    bool unreliable = false;
    /// Per replicate, NaN where skipped. Replicate i uses stream
    /// (seed, kBootstrap + i), so a longer run extends a shorter one.
    std::vector<double> max_gap;
    std::vector<double> weighted_gap;
    std::optional<Interval> max_gap_ci;
    std::optional<Interval> weighted_gap_ci;
};

/// Percentile bootstrap (2.5 / 97.5, type 7) of both gap statistics.
/// Records are resampled with replacement; every resampled record keeps the
/// tertile it had under the original cuts.
BootstrapResult bootstrap_gaps(std::span<const Outcome> samples, std::span<const double> rho, std::size_t B,
                               std::uint64_t seed, unsigned threads = 1, std::size_t bin_count = 15,
                               std::size_t min_support = 5);

struct PermutationResult {
    double observed = 0.0;
    double p_value = 1.0;
    double null_q975 = 0.0;
    std::size_t permutations = 0;
    std::vector<double> null;
    /// Per confidence bin, the 97.5th percentile of the null |gap| in that
    /// bin; NaN for bins that are not shared.
    std::vector<double> bin_band;
};

/// Within-confidence-bin permutation of rho with the original cuts held
/// fixed. p = (1 + #{null >= observed}) / (1 + P). Permutation j uses
/// stream (seed, kPermutation + j). ComputeError when no bin is shared.
PermutationResult permutation_test(std::span<const Outcome> samples, std::span<const double> rho,
                                   std::size_t P, std::uint64_t seed, GapStatistic statistic = GapStatistic::MaxGap,
                                   unsigned threads = 1, std::size_t bin_count = 15, std::size_t min_support = 5);

struct ProtocolConfig {
    Feature feature{FeatureKind::AggEntropy, false};
    std::size_t bin_count = 15;
    std::size_t min_support = 5;
    std::size_t bootstrap = 5000;
    std::size_t permutations = 5000;
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

struct GapReport {
    MatchedCurves curves;
    bool no_shared_support = false;
    double max_gap = 0.0;
    double wt_gap = 0.0;
    std::size_t shared_bins = 0;
    std::size_t support_min = 0;
    std::size_t support_q25 = 0;
    std::size_t support_median = 0;
    BootstrapResult bootstrap;
    std::optional<PermutationResult> permutation;
};

/// Curves, gaps, bootstrap CIs, permutation test and bin-support summary on
/// the whole dataset. Support quantiles are nearest-rank over the shared
/// bins' min(n_low, n_high).
GapReport run_protocol(const Dataset& data, const ProtocolConfig& config);

/// Same, from precomputed outcomes and feature values.
GapReport run_protocol(std::span<const Outcome> samples, std::span<const double> rho, const ProtocolConfig& config);

}  // namespace routecal
