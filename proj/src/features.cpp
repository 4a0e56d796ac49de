#include "routecal/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "routecal/errors.hpp"

namespace routecal {

void check_routing_matrix(const RoutingMatrix& alpha) {
    if (alpha.tokens < 2) {
        throw InputError("T_l = 1 sub-layer is uniform by construction and must be excluded");
    }
    if (alpha.positions < 1) throw InputError("routing matrix has no token positions");
    if (alpha.values.size() != alpha.tokens * alpha.positions) {
        throw InputError("routing matrix has ragged rows");
    }
    for (double a : alpha.values) {
        if (!(a >= 0.0 && a <= 1.0)) throw InputError(fmt::format("routing weight {} outside [0,1]", a));
    }
    for (std::size_t n = 0; n < alpha.positions; ++n) {
        double total = 0.0;
        for (std::size_t t = 0; t < alpha.tokens; ++t) total += alpha.at(t, n);
        if (std::abs(total - 1.0) > 1e-6) {
            throw InputError(fmt::format("routing column {} sums to {}", n, total));
        }
    }
}

double layer_entropy(const RoutingMatrix& alpha) {
    check_routing_matrix(alpha);
    double total = 0.0;
    for (std::size_t n = 0; n < alpha.positions; ++n) {
        double column = 0.0;
        for (std::size_t t = 0; t < alpha.tokens; ++t) column += alpha.at(t, n);
        for (std::size_t t = 0; t < alpha.tokens; ++t) {
            const double a = alpha.at(t, n) / column;
            if (a > 0.0) total -= a * std::log(a);
        }
    }
    const double h = total / (static_cast<double>(alpha.positions) * std::log(static_cast<double>(alpha.tokens)));
    if (h < -1e-9 || h > 1.0 + 1e-9) throw ComputeError(fmt::format("layer entropy {} outside [0,1]", h));
    return std::clamp(h, 0.0, 1.0);
}

std::vector<double> entropy_profile(std::span<const RoutingMatrix> alpha) {
    std::vector<double> h;
    h.reserve(alpha.size());
    for (const auto& layer : alpha) h.push_back(layer_entropy(layer));
    return h;
}

bool uses_routing(FeatureKind kind) noexcept {
    switch (kind) {
        case FeatureKind::ConfidenceOnly:
        case FeatureKind::PredEntropy:
            return false;
        default:
            return true;
    }
}

namespace {

constexpr std::array<std::pair<FeatureKind, std::string_view>, 7> kNames{{
    {FeatureKind::ConfidenceOnly, "conf"},
    {FeatureKind::PredEntropy, "pred_entropy"},
    {FeatureKind::AggEntropy, "r_agg"},
    {FeatureKind::Concentration, "concentration"},
    {FeatureKind::LastLayerEntropy, "h_last"},
    {FeatureKind::DepthVariance, "r_std"},
    {FeatureKind::EntropyTimesConfidence, "ent_x_conf"},
}};

}  // namespace

std::string feature_name(Feature feature) {
    for (const auto& [kind, name] : kNames) {
        if (kind == feature.kind) return feature.minmax ? fmt::format("mm_{}", name) : std::string(name);
    }
    return "unknown";
}

Feature parse_feature(std::string_view name) {
    Feature feature;
    if (name.starts_with("mm_")) {
        feature.minmax = true;
        name.remove_prefix(3);
    }
    for (const auto& [kind, known] : kNames) {
        if (known == name) {
            feature.kind = kind;
            return feature;
        }
    }
    throw InputError(fmt::format("unknown feature '{}'", name));
}

double profile_mean(std::span<const double> h) {
    double total = 0.0;
    for (double v : h) total += v;
    return total / static_cast<double>(h.size());
}

double profile_std(std::span<const double> h) {
    const double mean = profile_mean(h);
    double ss = 0.0;
    for (double v : h) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(h.size()));
}

double normalized_entropy(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) {
        if (p > 0.0) total -= p * std::log(p);
    }
    return std::clamp(total / std::log(static_cast<double>(probs.size())), 0.0, 1.0);
}

double scalar_feature(const PredictionRecord& record, FeatureKind kind) {
    if (kind == FeatureKind::ConfidenceOnly) return softmax_confidence(record.logits).confidence;
    if (kind == FeatureKind::PredEntropy) return normalized_entropy(softmax_confidence(record.logits).probs);

    if (!record.entropy_profile || record.entropy_profile->empty()) {
        throw InputError(fmt::format("record '{}': routing feature requested but no routing profile", record.id));
    }
    const auto& h = *record.entropy_profile;
    switch (kind) {
        case FeatureKind::AggEntropy:
            return profile_mean(h);
        case FeatureKind::Concentration:
            return 1.0 - profile_mean(h);
        case FeatureKind::LastLayerEntropy:
            return h.back();
        case FeatureKind::DepthVariance:
            return profile_std(h);
        case FeatureKind::EntropyTimesConfidence:
            return profile_mean(h) * softmax_confidence(record.logits).confidence;
        default:
            break;
    }
    throw InputError("unhandled feature kind");
}

std::vector<double> minmax_rescale(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) return out;
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double min = *lo;
    const double max = *hi;
    for (auto& v : out) v = (max == min) ? 0.5 : (v - min) / (max - min);
    return out;
}

std::vector<double> feature_column(const Dataset& data, Feature feature) {
    std::vector<double> column;
    column.reserve(data.size());
    for (const auto& rec : data.records()) column.push_back(scalar_feature(rec, feature.kind));
    return feature.minmax ? minmax_rescale(column) : column;
}

}  // namespace routecal
