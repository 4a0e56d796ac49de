#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "routecal/record.hpp"

namespace routecal {

/// Validates an alpha block: T >= 2, entries in [0,1], every column sums to
/// 1 within 1e-6. Throws InputError.
void check_routing_matrix(const RoutingMatrix& alpha);

/// Normalized Shannon entropy of one sub-layer's routing weights, averaged
/// over token positions and divided by log T. 0 log 0 := 0. Columns are
/// renormalized to sum exactly to 1 before the entropy is taken.
double layer_entropy(const RoutingMatrix& alpha);

std::vector<double> entropy_profile(std::span<const RoutingMatrix> alpha);

enum class FeatureKind {
    ConfidenceOnly,
    PredEntropy,
    AggEntropy,
    Concentration,
    LastLayerEntropy,
    DepthVariance,
    EntropyTimesConfidence,
};

/// A scalar feature, optionally min-max rescaled over the whole cache.
struct Feature {
    FeatureKind kind = FeatureKind::AggEntropy;
    bool minmax = false;

    friend bool operator==(const Feature&, const Feature&) = default;
};

bool uses_routing(FeatureKind kind) noexcept;

/// Canonical names: conf, pred_entropy, r_agg, concentration, h_last, r_std,
/// ent_x_conf. A `mm_` prefix selects the min-max rescaled variant.
std::string feature_name(Feature feature);
Feature parse_feature(std::string_view name);

/// Depth statistics over a profile; r_std is the population standard
/// deviation (divide by L).
double profile_mean(std::span<const double> h);
double profile_std(std::span<const double> h);

/// -sum p log p / log K, in [0, 1].
double normalized_entropy(std::span<const double> probs);

/// Throws InputError if a routing kind is requested and the record has no
/// profile.
double scalar_feature(const PredictionRecord& record, FeatureKind kind);

/// (v - min) / (max - min); all 0.5 when max == min. Label-free.
std::vector<double> minmax_rescale(std::span<const double> values);

/// scalar_feature over every record, min-max rescaled across the whole
/// dataset when `feature.minmax` is set.
std::vector<double> feature_column(const Dataset& data, Feature feature);

}  // namespace routecal
