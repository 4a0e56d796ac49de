#include "routecal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "routecal/errors.hpp"
#include "routecal/rng.hpp"

namespace routecal {

double planted_delta(const PlantedSpec& spec, double c) {
    double total = 0.0;
    for (const auto& seg : spec.gap) {
        if (c >= seg.lo && c < seg.hi) total += seg.amplitude;
    }
    return total;
}

double planted_eta(const PlantedSpec& spec, std::size_t group, double c) {
    const auto& g = spec.groups[group];
    return c + g.shift + g.gap_weight * planted_delta(spec, c);
}

void validate_planted(const PlantedSpec& spec) {
    if (spec.n == 0) throw InputError("synthetic: n must be positive");
    if (spec.classes < 2) throw InputError("synthetic: K must be at least 2");
    if (!(spec.beta_a > 0.0) || !(spec.beta_b > 0.0)) throw InputError("synthetic: Beta parameters must be positive");
    if (spec.groups.empty()) throw InputError("synthetic: at least one group is required");
    for (const auto& g : spec.groups) {
        if (!(g.r_agg_lo >= 0.0 && g.r_agg_lo <= g.r_agg_hi && g.r_agg_hi <= 1.0) ||
            !(g.r_std_lo >= 0.0 && g.r_std_lo <= g.r_std_hi && g.r_std_hi <= 0.5)) {
            throw InputError("synthetic: routing law outside [0, 1] (r_std at most 0.5)");
        }
    }
    const double c_min = 1.0 / static_cast<double>(spec.classes);
    std::vector<double> probe;
    for (int j = 0; j <= 1000; ++j) probe.push_back(c_min + (1.0 - c_min) * j / 1000.0);
    for (const auto& seg : spec.gap) {
        for (double x : {seg.lo, seg.hi, std::nextafter(seg.hi, 0.0)}) {
            if (x >= c_min && x <= 1.0) probe.push_back(x);
        }
    }
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
        for (double c : probe) {
            const double eta = planted_eta(spec, g, c);
            if (!(eta >= 0.0 && eta <= 1.0)) {
                throw InputError("synthetic: eta of group " + std::to_string(g) + " leaves [0, 1] at c = " +
                                 std::to_string(c));
            }
        }
    }
}

namespace {

std::vector<double> standardized_pattern(std::size_t layers) {
    std::vector<double> s(layers, 0.0);
    if (layers < 2) return s;
    double m = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
        s[l] = -1.0 + 2.0 * static_cast<double>(l) / static_cast<double>(layers - 1);
        m += s[l];
    }
    m /= static_cast<double>(layers);
    double var = 0.0;
    for (auto& v : s) {
        v -= m;
        var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(layers));
    for (auto& v : s) v /= sd;
    return s;
}

}  // namespace

PlantedData generate_planted(const PlantedSpec& spec) {
    validate_planted(spec);
    const std::size_t k = spec.classes;
    const double c_min = 1.0 / static_cast<double>(k);
    const auto pattern = standardized_pattern(spec.layers);
    double s_max = 0.0;
    for (double v : pattern) s_max = std::max(s_max, std::abs(v));

    PlantedData out;
    std::vector<PredictionRecord> records(spec.n);
    out.eta.resize(spec.n);
    out.group.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        auto rng = derive_stream(spec.seed, streams::kSynthetic + i);
        const double c =
            std::clamp(c_min + (1.0 - c_min) * rng.beta(spec.beta_a, spec.beta_b), c_min + 1e-12, 1.0 - 1e-12);
        const auto g = static_cast<std::size_t>(rng.below(spec.groups.size()));
        const auto& group = spec.groups[g];
        const double r_agg = group.r_agg_lo + (group.r_agg_hi - group.r_agg_lo) * rng.uniform();
        const double r_std = group.r_std_lo + (group.r_std_hi - group.r_std_lo) * rng.uniform();
        const double eta = planted_eta(spec, g, c);
        const bool correct = rng.bernoulli(eta);
        const auto pred = static_cast<std::size_t>(rng.below(k));
        std::size_t label = pred;
        if (!correct) {
            label = static_cast<std::size_t>(rng.below(k - 1));
            if (label >= pred) ++label;
        }

        auto& rec = records[i];
        rec.id = "s" + std::to_string(i);
        rec.logits.assign(k, 0.0);
        rec.logits[pred] = std::log(c * static_cast<double>(k - 1) / (1.0 - c));
        rec.label = label;
        if (spec.layers > 0) {
            double b = r_std;
            if (s_max > 0.0) b = std::min(b, std::min(r_agg, 1.0 - r_agg) / s_max);
            std::vector<double> h(spec.layers);
            for (std::size_t l = 0; l < spec.layers; ++l) h[l] = std::clamp(r_agg + b * pattern[l], 0.0, 1.0);
            rec.entropy_profile = std::move(h);
        }
        out.eta[i] = eta;
        out.group[i] = g;
    }
    out.data = Dataset(std::move(records));
    return out;
}

namespace {

constexpr std::string_view kPresets[] = {"null", "planted-gap", "tertile-ece", "routing-signal"};

GroupSpec group(double lo, double hi, double shift, double gap_weight) {
    GroupSpec g;
    g.r_agg_lo = lo;
    g.r_agg_hi = hi;
    g.r_std_lo = 0.0;
    g.r_std_hi = 0.1;
    g.shift = shift;
    g.gap_weight = gap_weight;
    return g;
}

}  // namespace

std::span<const std::string_view> planted_preset_names() { return kPresets; }

PlantedSpec planted_preset(std::string_view name, std::size_t n, std::uint64_t seed) {
    PlantedSpec spec;
    spec.n = n;
    spec.seed = seed;
    if (name == "null") {
        spec.groups = {group(0.05, 0.95, 0.0, 0.0)};
    } else if (name == "planted-gap") {
        spec.groups = {group(0.05, 0.30, 0.0, 0.5), group(0.35, 0.65, 0.0, 0.0), group(0.70, 0.95, 0.0, -0.5)};
        spec.gap = {GapSegment{0.6, 0.8, 0.3}};
    } else if (name == "tertile-ece") {
        spec.groups = {group(0.05, 0.30, -0.05, 0.0), group(0.35, 0.65, -0.10, 0.0), group(0.70, 0.95, -0.20, 0.0)};
    } else if (name == "routing-signal") {
        spec.groups = {group(0.05, 0.45, -0.5, 0.0), group(0.55, 0.95, 0.0, 0.0)};
    } else {
        throw InputError("unknown synthetic preset: " + std::string(name));
    }
    return spec;
}

}  // namespace routecal
