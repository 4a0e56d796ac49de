#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "routecal/binning.hpp"
#include "routecal/kernel.hpp"
#include "routecal/rcmmc.hpp"
#include "routecal/temperature.hpp"

namespace routecal {

enum class Method { None, Ts, Vs, Cts, Hb, Iso, Lc, Rcmmc, NwConf, NwPredEnt, ArCondCal };

/// CLI names: none, ts, vs, cts, hb, iso, lc, rcmmc, nw-conf, nw-predent,
/// ar-condcal.
std::string method_name(Method method);
Method parse_method(std::string_view name);

/// Every method in table order, `None` first.
std::span<const Method> all_methods();

/// True for methods whose kernel feature comes from routing data.
bool needs_routing(Method method) noexcept;
bool is_kernel(Method method) noexcept;
/// Temperature-family methods never change the argmax.
bool preserves_argmax(Method method) noexcept;

/// Inputs shared by fit and apply. `route` holds the routing feature of
/// ar-condcal for each row and is ignored by every other method.
struct CalibrationSet {
    std::vector<std::vector<double>> logits;
    std::vector<std::size_t> labels;
    std::vector<double> route;
};

struct CalibratorOptions {
    KernelSpec bandwidth;
    std::uint64_t seed = 42;
    std::size_t rcmmc_margin_bins = 8;
    std::size_t rcmmc_entropy_bins = 4;
    std::size_t hb_bins = 15;
};

struct IdentityModel {};

struct KernelCalibrator {
    KernelModel model;
    BandwidthSelection bandwidth;
};

struct FittedCalibrator {
    Method method = Method::None;
    std::variant<IdentityModel, TemperatureModel, VectorScalingModel, ClasswiseTemperatureModel,
                 HistogramBinningModel, IsotonicModel, LcModel, RcmmcModel, KernelCalibrator>
        params;
};

/// `heldout` is consulted only by the oracle-ece bandwidth mode.
FittedCalibrator fit_calibrator(Method method, const CalibrationSet& cal, const CalibratorOptions& options = {},
                                const CalibrationSet* heldout = nullptr);

/// Calibrated probability vectors, one per row. Kernel methods add their
/// clip events to `clip` when it is given.
std::vector<std::vector<double>> apply_calibrator(const FittedCalibrator& fitted, const CalibrationSet& data,
                                                  ClipStats* clip = nullptr);

}  // namespace routecal
