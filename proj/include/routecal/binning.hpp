#pragma once

#include <span>
#include <vector>

#include "routecal/metrics.hpp"

namespace routecal {

/// Replaces the top-class probability by `confidence` and rescales the other
/// classes proportionally so the vector stays on the simplex. If the other
/// classes carry no mass they share 1 - confidence uniformly.
std::vector<double> rescale_top(std::span<const double> probs, double confidence);

/// Equal-mass histogram binning of top-class confidence.
struct HistogramBinningModel {
    std::vector<double> upper;  // largest calibration confidence in each non-empty bin
    std::vector<double> value;  // empirical accuracy of that bin
};

HistogramBinningModel fit_histogram_binning(std::span<const Outcome> cal, std::size_t bin_count = 15);
double histogram_binning_map(const HistogramBinningModel& model, double confidence);

/// Monotone step function: value[i] applies on [knot[i], knot[i+1]).
/// Inputs below the first knot take value[0].
struct IsotonicModel {
    std::vector<double> knot;
    std::vector<double> value;
};

/// Pool-adjacent-violators on (conf, correct) sorted by confidence; equal
/// confidences are merged into one weighted point first.
IsotonicModel fit_isotonic(std::span<const Outcome> cal);
double isotonic_map(const IsotonicModel& model, double confidence);

}  // namespace routecal
