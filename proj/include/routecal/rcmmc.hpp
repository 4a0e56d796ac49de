#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "routecal/temperature.hpp"

namespace routecal {

/// Routing-free multi-cell temperature scaling over the (top1 - top2 margin,
/// normalized predictive entropy) plane. Cells are quantile bins fitted on
/// the calibration set; each cell carries its own temperature.
struct RcmmcModel {
    std::size_t margin_bins = 8;
    std::size_t entropy_bins = 4;
    /// Interior cut points (type-7 quantiles), margin_bins - 1 and
    /// entropy_bins - 1 of them.
    std::vector<double> margin_cuts;
    std::vector<double> entropy_cuts;
    /// Row-major [entropy_row * margin_bins + margin_col].
    std::vector<double> tau;
    std::vector<std::size_t> counts;
    /// Cells whose temperature was re-solved by the monotone projection.
    std::size_t projected_cells = 0;
    /// Cells with no calibration sample, filled from a neighbour.
    std::size_t filled_cells = 0;
};

struct RcmmcPosition {
    double margin = 0.0;
    double entropy = 0.0;
};

/// Margin and normalized entropy of softmax(z).
RcmmcPosition rcmmc_position(std::span<const double> logits);

/// Cell index of a position; values outside the calibration range land in
/// the edge cells.
std::size_t rcmmc_cell(const RcmmcModel& model, RcmmcPosition pos);

/// Per-cell NLL-optimal temperatures (golden-section on log tau in [-4, 4]),
/// then, within each entropy row, the per-cell mean calibrated confidence is
/// projected onto nondecreasing sequences along the margin axis (weighted
/// PAVA over non-empty cells) and each changed cell's temperature is
/// re-solved to hit its projected mean. Empty cells copy the temperature of
/// their neighbour one step closer to the median cell. Requires
/// n >= margin_bins * entropy_bins.
RcmmcModel fit_rcmmc(LogitRows logits, std::span<const std::size_t> labels, std::size_t margin_bins = 8,
                     std::size_t entropy_bins = 4);

std::vector<double> apply_rcmmc(const RcmmcModel& model, std::span<const double> logits);

}  // namespace routecal
