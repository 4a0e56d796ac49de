#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "routecal/record.hpp"

namespace routecal {

/// Routing law and correctness offsets of one latent group.
struct GroupSpec {
    /// r_agg ~ U[r_agg_lo, r_agg_hi], r_std ~ U[r_std_lo, r_std_hi].
    double r_agg_lo = 0.0;
    double r_agg_hi = 1.0;
    double r_std_lo = 0.0;
    double r_std_hi = 0.0;
    /// eta_g(c) = c + shift + gap_weight * delta(c).
    double shift = 0.0;
    double gap_weight = 0.0;
};

/// delta(c) = amplitude on [lo, hi), 0 elsewhere.
struct GapSegment {
    double lo = 0.0;
    double hi = 1.0;
    double amplitude = 0.0;
};

struct PlantedSpec {
    std::size_t n = 10000;
    std::size_t classes = 2;
    std::size_t layers = 4;
    /// Confidence c = 1/K + (1 - 1/K) * Beta(beta_a, beta_b).
    double beta_a = 1.0;
    double beta_b = 1.0;
    /// Groups are drawn with equal probability.
    std::vector<GroupSpec> groups{GroupSpec{}};
    std::vector<GapSegment> gap;
    std::uint64_t seed = 0;
};

struct PlantedData {
    Dataset data;
    /// True P(correct) of each record.
    std::vector<double> eta;
    std::vector<std::size_t> group;
};

double planted_delta(const PlantedSpec& spec, double c);
double planted_eta(const PlantedSpec& spec, std::size_t group, double c);

/// Throws InputError when the spec is malformed or some eta_g leaves [0, 1]
/// on the attainable confidence range (checked on a fine grid and at every
/// segment edge).
void validate_planted(const PlantedSpec& spec);

/// Logits put log(c (K-1) / (1-c)) on a random class and 0 elsewhere, so the
/// softmax confidence equals c. The entropy profile is h_l = a + b s_l with
/// s a standardized linear pattern, a = r_agg and b = r_std (shrunk if needed
/// to stay inside [0, 1]), so the profile mean is r_agg exactly. Record i
/// draws from stream (seed, kSynthetic + i).
PlantedData generate_planted(const PlantedSpec& spec);

/// Named substrates used by the CLI and the tests (K = 2, L = 4):
///   null            one group, eta = c, r_agg ~ U[0.05, 0.95]
///   planted-gap     low / mid / high r_agg groups with eta = c + 0.15, c,
///                   c - 0.15 on confidences in [0.6, 0.8), eta = c elsewhere
///   tertile-ece     three disjoint r_agg groups, eta = c - 0.05 / 0.10 / 0.20
///   routing-signal  two r_agg groups, eta = c - 0.5 and eta = c
PlantedSpec planted_preset(std::string_view name, std::size_t n, std::uint64_t seed);
std::span<const std::string_view> planted_preset_names();

}  // namespace routecal
