#include "routecal/calibrator.hpp"

#include <algorithm>
#include <array>

#include "routecal/errors.hpp"
#include "routecal/features.hpp"
#include "routecal/metrics.hpp"
#include "routecal/record.hpp"

namespace routecal {
namespace {

constexpr std::array kMethods = {Method::None,  Method::Ts,     Method::Vs,     Method::Cts,
                                 Method::Hb,    Method::Iso,    Method::Lc,     Method::Rcmmc,
                                 Method::NwConf, Method::NwPredEnt, Method::ArCondCal};

constexpr std::array<std::string_view, kMethods.size()> kNames = {
    "none", "ts", "vs", "cts", "hb", "iso", "lc", "rcmmc", "nw-conf", "nw-predent", "ar-condcal"};

// Kernel feature column for one of the kernel methods; empty for nw-conf.
std::vector<double> kernel_feature(Method method, const CalibrationSet& data) {
    std::vector<double> r;
    if (method == Method::NwPredEnt) {
        r.reserve(data.logits.size());
        for (const auto& z : data.logits) r.push_back(normalized_entropy(softmax(z)));
    } else if (method == Method::ArCondCal) {
        if (data.route.size() != data.logits.size()) {
            throw InputError("ar-condcal needs a routing feature for every record");
        }
        r = data.route;
    }
    return r;
}

std::vector<Outcome> top_outcomes(const CalibrationSet& cal) {
    std::vector<Outcome> out;
    out.reserve(cal.logits.size());
    for (std::size_t i = 0; i < cal.logits.size(); ++i) {
        const auto s = softmax_confidence(cal.logits[i]);
        out.push_back({s.confidence, s.pred == cal.labels[i]});
    }
    return out;
}

}  // namespace

std::string method_name(Method method) {
    for (std::size_t i = 0; i < kMethods.size(); ++i) {
        if (kMethods[i] == method) return std::string(kNames[i]);
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (std::size_t i = 0; i < kMethods.size(); ++i) {
        if (kNames[i] == name) return kMethods[i];
    }
    throw InputError("unknown calibration method: " + std::string(name));
}

std::span<const Method> all_methods() { return kMethods; }

bool needs_routing(Method method) noexcept { return method == Method::ArCondCal; }

bool is_kernel(Method method) noexcept {
    return method == Method::NwConf || method == Method::NwPredEnt || method == Method::ArCondCal;
}

bool preserves_argmax(Method method) noexcept {
    switch (method) {
        case Method::None:
        case Method::Ts:
        case Method::Cts:
        case Method::Lc:
        case Method::Rcmmc:
        case Method::NwConf:
        case Method::NwPredEnt:
        case Method::ArCondCal:
            return true;
        default:
            return false;
    }
}

FittedCalibrator fit_calibrator(Method method, const CalibrationSet& cal, const CalibratorOptions& options,
                                const CalibrationSet* heldout) {
    if (cal.logits.empty()) throw InputError("empty calibration set");
    if (cal.labels.size() != cal.logits.size()) throw InputError("logits and labels differ in length");
    FittedCalibrator fitted;
    fitted.method = method;
    switch (method) {
        case Method::None:
            fitted.params = IdentityModel{};
            break;
        case Method::Ts:
            fitted.params = fit_temperature(cal.logits, cal.labels);
            break;
        case Method::Vs:
            fitted.params = fit_vector_scaling(cal.logits, cal.labels);
            break;
        case Method::Cts:
            fitted.params = fit_classwise_ts(cal.logits, cal.labels);
            break;
        case Method::Hb:
            fitted.params = fit_histogram_binning(top_outcomes(cal), options.hb_bins);
            break;
        case Method::Iso:
            fitted.params = fit_isotonic(top_outcomes(cal));
            break;
        case Method::Lc:
            fitted.params = fit_lc(cal.logits, cal.labels);
            break;
        case Method::Rcmmc:
            fitted.params =
                fit_rcmmc(cal.logits, cal.labels, options.rcmmc_margin_bins, options.rcmmc_entropy_bins);
            break;
        case Method::NwConf:
        case Method::NwPredEnt:
        case Method::ArCondCal: {
            const auto r = kernel_feature(method, cal);
            const CondCalInputs inputs{cal.logits, cal.labels, r};
            std::vector<double> held_r;
            std::optional<CondCalInputs> held_inputs;
            if (heldout != nullptr) {
                held_r = kernel_feature(method, *heldout);
                held_inputs = CondCalInputs{heldout->logits, heldout->labels, held_r};
            }
            KernelCalibrator k;
            k.bandwidth = select_bandwidth(inputs, options.bandwidth, options.seed,
                                           held_inputs ? &*held_inputs : nullptr);
            k.model = fit_condcal(inputs, k.bandwidth.multiplier);
            fitted.params = std::move(k);
            break;
        }
    }
    return fitted;
}

std::vector<std::vector<double>> apply_calibrator(const FittedCalibrator& fitted, const CalibrationSet& data,
                                                  ClipStats* clip) {
    std::vector<std::vector<double>> out;
    out.reserve(data.logits.size());
    const auto r = is_kernel(fitted.method) ? kernel_feature(fitted.method, data) : std::vector<double>{};
    ClipStats stats;
    for (std::size_t i = 0; i < data.logits.size(); ++i) {
        const auto& z = data.logits[i];
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, IdentityModel>) {
                    out.push_back(softmax(z));
                } else if constexpr (std::is_same_v<T, TemperatureModel>) {
                    out.push_back(softmax(z, m.tau));
                } else if constexpr (std::is_same_v<T, VectorScalingModel>) {
                    out.push_back(apply_vector_scaling(m, z));
                } else if constexpr (std::is_same_v<T, ClasswiseTemperatureModel>) {
                    out.push_back(apply_classwise_ts(m, z));
                } else if constexpr (std::is_same_v<T, HistogramBinningModel>) {
                    const auto p = softmax(z);
                    out.push_back(rescale_top(p, histogram_binning_map(m, p[argmax(p)])));
                } else if constexpr (std::is_same_v<T, IsotonicModel>) {
                    const auto p = softmax(z);
                    out.push_back(rescale_top(p, isotonic_map(m, p[argmax(p)])));
                } else if constexpr (std::is_same_v<T, LcModel>) {
                    out.push_back(apply_lc(m, z));
                } else if constexpr (std::is_same_v<T, RcmmcModel>) {
                    out.push_back(apply_rcmmc(m, z));
                } else {
                    out.push_back(apply_condcal(m.model, z, r.empty() ? 0.0 : r[i], stats));
                }
            },
            fitted.params);
    }
    if (clip != nullptr) *clip += stats;
    return out;
}

}  // namespace routecal
