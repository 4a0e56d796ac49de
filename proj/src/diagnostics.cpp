#include "routecal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "routecal/errors.hpp"
#include "routecal/parallel.hpp"
#include "routecal/rng.hpp"
#include "routecal/stats.hpp"

namespace routecal {

std::size_t MatchedCurves::shared_bins() const {
    return static_cast<std::size_t>(std::count_if(bins.begin(), bins.end(), [](const CurveBin& b) { return b.shared; }));
}

namespace {

constexpr std::size_t kLow = 0;
constexpr std::size_t kHigh = 2;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_lengths(std::span<const Outcome> samples, std::span<const double> rho) {
    if (samples.size() != rho.size()) throw InputError("samples and rho differ in length");
    if (samples.size() < 3) throw InputError("at least three samples are needed for tertiles");
}

// Per-record (bin, tertile, correct) under fixed cuts.
struct Coded {
    std::vector<std::size_t> bin;
    std::vector<std::size_t> tertile;
    std::vector<unsigned char> correct;
};

Coded encode(std::span<const Outcome> samples, std::span<const double> rho, double q_low, double q_high,
             std::size_t bin_count) {
    Coded c;
    c.bin.reserve(samples.size());
    c.tertile.reserve(samples.size());
    c.correct.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        c.bin.push_back(equal_width_bin(samples[i].confidence, bin_count));
        c.tertile.push_back(static_cast<std::size_t>(assign_tertile(rho[i], q_low, q_high)));
        c.correct.push_back(samples[i].correct ? 1 : 0);
    }
    return c;
}

struct Tally {
    std::vector<std::array<double, 3>> n;
    std::vector<std::array<double, 3>> hits;

    explicit Tally(std::size_t bins) : n(bins, {0, 0, 0}), hits(bins, {0, 0, 0}) {}
};

struct Gaps {
    bool any_shared = false;
    double max_gap = 0.0;
    double weighted_gap = 0.0;
};

Gaps gaps_from(const Tally& tally, std::size_t min_support) {
    Gaps g;
    double num = 0.0;
    double den = 0.0;
    const double ms = static_cast<double>(min_support);
    for (std::size_t b = 0; b < tally.n.size(); ++b) {
        const double nl = tally.n[b][kLow];
        const double nh = tally.n[b][kHigh];
        if (nl < ms || nh < ms || nl == 0.0 || nh == 0.0) continue;
        const double gap = std::abs(tally.hits[b][kLow] / nl - tally.hits[b][kHigh] / nh);
        g.any_shared = true;
        g.max_gap = std::max(g.max_gap, gap);
        const double w = std::min(nl, nh);
        num += w * gap;
        den += w;
    }
    if (den > 0.0) g.weighted_gap = num / den;
    return g;
}

Interval percentile_interval(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {quantile_sorted(values, 0.025), quantile_sorted(values, 0.975)};
}

}  // namespace

MatchedCurves matched_confidence_curves(std::span<const Outcome> samples, std::span<const double> rho,
                                        double q_low, double q_high, std::size_t bin_count,
                                        std::size_t min_support) {
    check_lengths(samples, rho);
    if (bin_count == 0) throw InputError("bin_count must be positive");
    const auto coded = encode(samples, rho, q_low, q_high, bin_count);
    MatchedCurves curves;
    curves.q_low = q_low;
    curves.q_high = q_high;
    curves.min_support = min_support;
    curves.bins.resize(bin_count);
    std::vector<std::array<double, 3>> conf_sum(bin_count, {0, 0, 0});
    std::vector<std::array<double, 3>> hit_sum(bin_count, {0, 0, 0});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto& bin = curves.bins[coded.bin[i]];
        ++bin.n[coded.tertile[i]];
        conf_sum[coded.bin[i]][coded.tertile[i]] += samples[i].confidence;
        hit_sum[coded.bin[i]][coded.tertile[i]] += coded.correct[i];
    }
    for (std::size_t b = 0; b < bin_count; ++b) {
        auto& bin = curves.bins[b];
        bin.lo = static_cast<double>(b) / static_cast<double>(bin_count);
        bin.hi = static_cast<double>(b + 1) / static_cast<double>(bin_count);
        for (std::size_t t = 0; t < 3; ++t) {
            if (bin.n[t] > 0) {
                bin.acc[t] = hit_sum[b][t] / static_cast<double>(bin.n[t]);
                bin.conf[t] = conf_sum[b][t] / static_cast<double>(bin.n[t]);
            }
            bin.valid[t] = bin.n[t] > 0 && bin.n[t] >= min_support;
        }
        bin.shared = bin.valid[kLow] && bin.valid[kHigh];
    }
    return curves;
}

MatchedCurves matched_confidence_curves(std::span<const Outcome> samples, std::span<const double> rho,
                                        std::size_t bin_count, std::size_t min_support) {
    check_lengths(samples, rho);
    const auto split = tertile_split(rho);
    return matched_confidence_curves(samples, rho, split.q_low, split.q_high, bin_count, min_support);
}

double max_gap(const MatchedCurves& curves) {
    if (curves.shared_bins() == 0) throw ComputeError("no shared support: no bin is valid in both tertiles");
    double best = 0.0;
    for (const auto& b : curves.bins) {
        if (b.shared) best = std::max(best, std::abs(b.acc[kLow] - b.acc[kHigh]));
    }
    return best;
}

double weighted_gap(const MatchedCurves& curves) {
    if (curves.shared_bins() == 0) throw ComputeError("no shared support: no bin is valid in both tertiles");
    double num = 0.0;
    double den = 0.0;
    for (const auto& b : curves.bins) {
        if (!b.shared) continue;
        const double w = static_cast<double>(std::min(b.n[kLow], b.n[kHigh]));
        num += w * std::abs(b.acc[kLow] - b.acc[kHigh]);
        den += w;
    }
    return num / den;
}

BootstrapResult bootstrap_gaps(std::span<const Outcome> samples, std::span<const double> rho, std::size_t B,
                               std::uint64_t seed, unsigned threads, std::size_t bin_count,
                               std::size_t min_support) {
    check_lengths(samples, rho);
    if (B < 100) throw InputError("bootstrap needs at least 100 replicates");
    const auto split = tertile_split(rho);
    const auto coded = encode(samples, rho, split.q_low, split.q_high, bin_count);
    const std::size_t n = samples.size();

    BootstrapResult out;
    out.replicates = B;
    out.max_gap.assign(B, kNaN);
    out.weighted_gap.assign(B, kNaN);
    parallel_for(B, threads, [&](std::size_t rep) {
        auto rng = derive_stream(seed, streams::kBootstrap + rep);
        Tally tally(bin_count);
        for (std::size_t draw = 0; draw < n; ++draw) {
            const auto i = static_cast<std::size_t>(rng.below(n));
            tally.n[coded.bin[i]][coded.tertile[i]] += 1.0;
            tally.hits[coded.bin[i]][coded.tertile[i]] += coded.correct[i];
        }
        const auto g = gaps_from(tally, min_support);
        if (!g.any_shared) return;
        out.max_gap[rep] = g.max_gap;
        out.weighted_gap[rep] = g.weighted_gap;
    });

    std::vector<double> valid_max;
    std::vector<double> valid_wt;
    for (std::size_t rep = 0; rep < B; ++rep) {
        if (std::isnan(out.max_gap[rep])) {
            ++out.skipped;
            continue;
        }
        valid_max.push_back(out.max_gap[rep]);
        valid_wt.push_back(out.weighted_gap[rep]);
    }
    out.unreliable = 2 * out.skipped > B;
    if (!valid_max.empty()) {
        out.max_gap_ci = percentile_interval(std::move(valid_max));
        out.weighted_gap_ci = percentile_interval(std::move(valid_wt));
    }
    return out;
}

PermutationResult permutation_test(std::span<const Outcome> samples, std::span<const double> rho, std::size_t P,
                                   std::uint64_t seed, GapStatistic statistic, unsigned threads,
                                   std::size_t bin_count, std::size_t min_support) {
    check_lengths(samples, rho);
    if (P < 100) throw InputError("permutation test needs at least 100 permutations");
    const auto split = tertile_split(rho);
    const auto coded = encode(samples, rho, split.q_low, split.q_high, bin_count);

    // Group correctness by confidence bin. Permuting rho inside a bin with
    // fixed cuts only reshuffles which members hold which tertile; the
    // per-bin tertile counts stay fixed.
    std::vector<std::vector<unsigned char>> members(bin_count);
    Tally observed(bin_count);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        members[coded.bin[i]].push_back(coded.correct[i]);
        observed.n[coded.bin[i]][coded.tertile[i]] += 1.0;
        observed.hits[coded.bin[i]][coded.tertile[i]] += coded.correct[i];
    }
    const auto obs = gaps_from(observed, min_support);
    if (!obs.any_shared) throw ComputeError("no shared support: permutation test undefined");
    const auto pick = [statistic](const Gaps& g) {
        return statistic == GapStatistic::MaxGap ? g.max_gap : g.weighted_gap;
    };

    std::vector<std::size_t> shared;
    for (std::size_t b = 0; b < bin_count; ++b) {
        const double nl = observed.n[b][kLow];
        const double nh = observed.n[b][kHigh];
        if (nl >= static_cast<double>(min_support) && nh >= static_cast<double>(min_support) && nl > 0 && nh > 0) {
            shared.push_back(b);
        }
    }

    PermutationResult out;
    out.observed = pick(obs);
    out.permutations = P;
    out.null.assign(P, 0.0);
    std::vector<std::vector<double>> bin_gaps(bin_count);
    for (auto b : shared) bin_gaps[b].assign(P, 0.0);

    parallel_for(P, threads, [&](std::size_t perm) {
        auto rng = derive_stream(seed, streams::kPermutation + perm);
        Tally tally(bin_count);
        for (auto b : shared) {
            // A uniform permutation of the bin's members restricted to the
            // low slots [0, n_low) and high slots [n_low, n_low + n_high).
            auto items = members[b];
            const auto nl = static_cast<std::size_t>(observed.n[b][kLow]);
            const auto nh = static_cast<std::size_t>(observed.n[b][kHigh]);
            const std::size_t m = items.size();
            double hits_low = 0.0;
            double hits_high = 0.0;
            for (std::size_t j = 0; j < nl + nh; ++j) {
                const auto k = j + static_cast<std::size_t>(rng.below(m - j));
                std::swap(items[j], items[k]);
                (j < nl ? hits_low : hits_high) += items[j];
            }
            tally.n[b][kLow] = static_cast<double>(nl);
            tally.n[b][kHigh] = static_cast<double>(nh);
            tally.hits[b][kLow] = hits_low;
            tally.hits[b][kHigh] = hits_high;
            bin_gaps[b][perm] = std::abs(hits_low / static_cast<double>(nl) - hits_high / static_cast<double>(nh));
        }
        out.null[perm] = pick(gaps_from(tally, min_support));
    });

    const auto exceed = std::count_if(out.null.begin(), out.null.end(), [&](double v) { return v >= out.observed; });
    out.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(P));
    out.null_q975 = quantile(out.null, 0.975);
    out.bin_band.assign(bin_count, kNaN);
    for (auto b : shared) out.bin_band[b] = quantile(bin_gaps[b], 0.975);
    return out;
}

GapReport run_protocol(std::span<const Outcome> samples, std::span<const double> rho, const ProtocolConfig& config) {
    check_lengths(samples, rho);
    GapReport report;
    report.curves = matched_confidence_curves(samples, rho, config.bin_count, config.min_support);
    report.shared_bins = report.curves.shared_bins();
    report.no_shared_support = report.shared_bins == 0;
    report.bootstrap =
        bootstrap_gaps(samples, rho, config.bootstrap, config.seed, config.threads, config.bin_count, config.min_support);
    if (report.no_shared_support) return report;

    report.max_gap = max_gap(report.curves);
    report.wt_gap = weighted_gap(report.curves);
    std::vector<double> support;
    for (const auto& b : report.curves.bins) {
        if (b.shared) support.push_back(static_cast<double>(std::min(b.n[kLow], b.n[kHigh])));
    }
    std::sort(support.begin(), support.end());
    report.support_min = static_cast<std::size_t>(support.front());
    report.support_q25 = static_cast<std::size_t>(nearest_rank(support, 0.25));
    report.support_median = static_cast<std::size_t>(nearest_rank(support, 0.5));
    report.permutation = permutation_test(samples, rho, config.permutations, config.seed, GapStatistic::MaxGap,
                                          config.threads, config.bin_count, config.min_support);
    return report;
}

GapReport run_protocol(const Dataset& data, const ProtocolConfig& config) {
    if (uses_routing(config.feature.kind) && !data.has_routing()) {
        throw InputError("diagnostics need routing profiles for feature " + feature_name(config.feature));
    }
    std::vector<Outcome> samples;
    samples.reserve(data.size());
    for (const auto& rec : data.records()) {
        const auto s = softmax_confidence(rec.logits);
        samples.push_back({s.confidence, s.pred == rec.label});
    }
    const auto rho = feature_column(data, config.feature);
    return run_protocol(samples, rho, config);
}

}  // namespace routecal
