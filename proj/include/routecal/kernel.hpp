#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "routecal/temperature.hpp"

namespace routecal {

/// Scott's rule h = sigma * n^(-1/(dims + 4)).
double scott_bandwidth(double sigma, std::size_t n, std::size_t dims);

/// Nadaraya-Watson regression of t on c (1-D) or on (c, r) (2-D) with a
/// product Gaussian kernel exp(-dc^2 / 2h_c^2 - dr^2 / 2h_r^2).
struct KernelModel {
    std::vector<double> c;
    std::vector<double> r;  // empty for the 1-D variant
    std::vector<double> t;
    double h_c = 1.0;
    double h_r = 1.0;
    /// Non-fatal conditions met while fitting (constant feature, ...).
    std::vector<std::string> warnings;

    bool two_dimensional() const noexcept { return !r.empty(); }
};

/// Scott bandwidths from the sample (n - 1) std of each feature on the
/// calibration points, times `multiplier`. A constant feature gets h = 1e-3
/// and a warning. Pass an empty `r` for the 1-D variant.
KernelModel nw_fit(std::span<const double> c, std::span<const double> r, std::span<const double> t,
                   double multiplier = 1.0);

/// Explicit bandwidths.
KernelModel nw_fit_fixed(std::span<const double> c, std::span<const double> r, std::span<const double> t,
                         double h_c, double h_r);

/// Kernel-weighted mean of t, clamped to [0, 1]. When every weight
/// underflows (denominator below 1e-300) the t of the nearest calibration
/// point in bandwidth-scaled distance is returned.
double nw_predict(const KernelModel& model, double c, double r = 0.0);

struct ClipStats {
    std::size_t total = 0;
    std::size_t lower = 0;
    std::size_t upper = 0;
    /// All logits equal: no temperature changes the confidence.
    std::size_t degenerate = 0;
    /// Bisection ended without reaching the 1e-8 tolerance.
    std::size_t unattained = 0;

    double lower_rate() const noexcept { return total ? static_cast<double>(lower) / static_cast<double>(total) : 0.0; }
    double upper_rate() const noexcept { return total ? static_cast<double>(upper) / static_cast<double>(total) : 0.0; }

    ClipStats& operator+=(const ClipStats& other) noexcept;
};

inline constexpr double kClipEpsilon = 1e-6;

/// Target confidence clip(g(c, r), [1/K + eps, 1 - eps]) reached by a
/// per-sample temperature (see solve_temperature). The argmax never changes.
/// Degenerate samples come back as the uniform vector.
std::vector<double> apply_condcal(const KernelModel& model, std::span<const double> logits, double r,
                                  ClipStats& stats);

enum class BandwidthMode { FixedScott, ScottTimes, CvNll, OracleEce };

struct KernelSpec {
    BandwidthMode mode = BandwidthMode::FixedScott;
    /// Used by ScottTimes.
    double multiplier = 1.0;
};

/// Calibration or evaluation inputs for the kernel calibrators. `r` is empty
/// for the confidence-only variant.
struct CondCalInputs {
    LogitRows logits;
    std::span<const std::size_t> labels;
    std::span<const double> r;
};

/// Fits the kernel on (confidence, r, correct) triples derived from `inputs`.
KernelModel fit_condcal(const CondCalInputs& inputs, double multiplier);

struct BandwidthSelection {
    double multiplier = 1.0;
    std::vector<double> grid;
    std::vector<double> scores;
    bool diagnostic_only = false;
};

inline constexpr double kBandwidthGrid[] = {0.25, 0.5, 1.0, 2.0, 4.0};

/// FixedScott -> 1; ScottTimes -> spec.multiplier. CvNll scores each grid
/// multiplier by the mean over 5 folds of the held-out NLL of calibrated
/// probabilities (folds from stream (seed, kFolds)). OracleEce scores by the
/// global 15-bin ECE on `heldout`, which must be given, and is marked
/// diagnostic-only. Ties go to the smallest multiplier.
BandwidthSelection select_bandwidth(const CondCalInputs& cal, const KernelSpec& spec, std::uint64_t seed,
                                    const CondCalInputs* heldout = nullptr);

}  // namespace routecal
