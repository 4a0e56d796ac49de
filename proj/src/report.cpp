#include "routecal/report.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "routecal/errors.hpp"

namespace routecal {

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw ComputeError("sha256 digest failed");
    }
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

Json report_header(std::string_view command, const Json& config, std::string_view input_digest) {
    Json j;
    j["version"] = kVersion;
    j["command"] = command;
    j["input_sha256"] = input_digest;
    j["conventions"] = {
        {"r_std", "population standard deviation over layers (divide by L)"},
        {"tertile_quantiles", "type 7 at 0.33 / 0.67; low: rho <= q_low, mid: q_low < rho <= q_high, high: rho > q_high"},
        {"prng", "xoshiro256** seeded by SplitMix64 from (seed, stream index)"},
    };
    j["config"] = config;
    return j;
}

Json to_json(const MetricReport& r) {
    Json j;
    j["ece"] = r.ece;
    j["adaece"] = r.adaece;
    j["mce"] = r.mce;
    j["classwise_ece"] = r.classwise_ece;
    j["smooth_ece"] = r.smooth_ece;
    j["smooth_ece_sigma"] = r.smooth_ece_sigma;
    j["nll"] = r.nll;
    j["brier"] = r.brier;
    j["acc1"] = r.acc1;
    if (r.worst_tertile_ece) {
        j["worst_tertile_ece"] = *r.worst_tertile_ece;
        j["per_tertile_ece"] = *r.per_tertile_ece;
    } else {
        j["worst_tertile_ece"] = nullptr;
        j["per_tertile_ece"] = nullptr;
    }
    return j;
}

Json to_json(const ClipStats& s) {
    return Json{{"samples", s.total},           {"lower_clips", s.lower},
                {"upper_clips", s.upper},       {"lower_rate", s.lower_rate()},
                {"upper_rate", s.upper_rate()}, {"degenerate", s.degenerate},
                {"unattained", s.unattained}};
}

namespace {

Json kernel_json(const KernelCalibrator& k) {
    Json j;
    j["dimensions"] = k.model.two_dimensional() ? 2 : 1;
    j["h_c"] = k.model.h_c;
    if (k.model.two_dimensional()) j["h_r"] = k.model.h_r;
    j["multiplier"] = k.bandwidth.multiplier;
    if (!k.bandwidth.grid.empty()) {
        j["bandwidth_grid"] = k.bandwidth.grid;
        j["bandwidth_scores"] = k.bandwidth.scores;
    }
    j["diagnostic_only"] = k.bandwidth.diagnostic_only;
    j["warnings"] = k.model.warnings;
    j["calibration_points"] = k.model.c.size();
    j["c"] = k.model.c;
    if (k.model.two_dimensional()) j["r"] = k.model.r;
    j["t"] = k.model.t;
    return j;
}

}  // namespace

Json to_json(const FittedCalibrator& fitted) {
    Json j;
    j["method"] = method_name(fitted.method);
    j["epsilon"] = kClipEpsilon;
    Json p = std::visit(
        [](const auto& m) -> Json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IdentityModel>) {
                return Json::object();
            } else if constexpr (std::is_same_v<T, TemperatureModel>) {
                return Json{{"tau", m.tau}, {"at_boundary", m.at_boundary}};
            } else if constexpr (std::is_same_v<T, VectorScalingModel>) {
                return Json{{"w", m.w}, {"b", m.b}, {"iterations", m.iterations}, {"final_nll", m.final_nll}};
            } else if constexpr (std::is_same_v<T, ClasswiseTemperatureModel>) {
                return Json{{"tau", m.tau}};
            } else if constexpr (std::is_same_v<T, HistogramBinningModel>) {
                return Json{{"upper", m.upper}, {"value", m.value}};
            } else if constexpr (std::is_same_v<T, IsotonicModel>) {
                return Json{{"knot", m.knot}, {"value", m.value}};
            } else if constexpr (std::is_same_v<T, LcModel>) {
                return Json{{"tau", m.tau}};
            } else if constexpr (std::is_same_v<T, RcmmcModel>) {
                return Json{{"margin_bins", m.margin_bins},   {"entropy_bins", m.entropy_bins},
                            {"margin_cuts", m.margin_cuts},   {"entropy_cuts", m.entropy_cuts},
                            {"tau", m.tau},                   {"counts", m.counts},
                            {"projected_cells", m.projected_cells}, {"filled_cells", m.filled_cells},
                            {"class_offset", false}};
            } else {
                return kernel_json(m);
            }
        },
        fitted.params);
    j["parameters"] = std::move(p);
    return j;
}

Json to_json(const GapReport& r) {
    Json j;
    j["no_shared_support"] = r.no_shared_support;
    j["q_low"] = r.curves.q_low;
    j["q_high"] = r.curves.q_high;
    j["bin_count"] = r.curves.bins.size();
    j["min_support"] = r.curves.min_support;
    j["shared_bins"] = r.shared_bins;
    if (r.no_shared_support) {
        j["max_gap"] = nullptr;
        j["wt_gap"] = nullptr;
    } else {
        j["max_gap"] = r.max_gap;
        j["wt_gap"] = r.wt_gap;
    }
    const auto ci = [](const std::optional<Interval>& v) -> Json {
        if (!v) return nullptr;
        return Json::array({v->lo, v->hi});
    };
    j["max_gap_ci"] = ci(r.bootstrap.max_gap_ci);
    j["wt_gap_ci"] = ci(r.bootstrap.weighted_gap_ci);
    j["B"] = r.bootstrap.replicates;
    j["bootstrap_skipped"] = r.bootstrap.skipped;
    j["ci_unreliable"] = r.bootstrap.unreliable;
    j["ci_note"] = "percentile CI of an absolute-value statistic; need not contain the point estimate";
    j["support_min"] = r.support_min;
    j["support_q25"] = r.support_q25;
    j["support_median"] = r.support_median;
    if (r.permutation) {
        j["P"] = r.permutation->permutations;
        j["perm_p"] = r.permutation->p_value;
        j["null_q975"] = r.permutation->null_q975;
    } else {
        j["P"] = 0;
        j["perm_p"] = nullptr;
        j["null_q975"] = nullptr;
    }
    return j;
}

Json to_json(const ProbeFit& fit) {
    Json j;
    j["name"] = fit.name;
    if (fit.r2.undefined) {
        j["r2"] = nullptr;
    } else {
        j["r2"] = fit.r2.value;
    }
    j["r2_undefined"] = fit.r2.undefined;
    j["train_sse"] = fit.train_sse;
    return j;
}

std::string reliability_csv(std::span<const BinSummary> bins) {
    std::string out = "bin_lo,bin_hi,n,acc,conf\n";
    for (const auto& b : bins) out += fmt::format("{},{},{},{},{}\n", b.lo, b.hi, b.n, b.acc, b.conf);
    return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

}  // namespace routecal
