#include "routecal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "routecal/errors.hpp"
#include "routecal/record.hpp"
#include "routecal/stats.hpp"

namespace routecal {

std::size_t equal_width_bin(double confidence, std::size_t bin_count) {
    const double b = static_cast<double>(bin_count);
    auto idx = static_cast<std::size_t>(std::max(0.0, std::floor(confidence * b)));
    idx = std::min(idx, bin_count - 1);
    // Settle floating-point disagreement between floor(c * B) and the
    // comparison against the edge b / B.
    while (idx > 0 && confidence < static_cast<double>(idx) / b) --idx;
    while (idx + 1 < bin_count && confidence >= static_cast<double>(idx + 1) / b) ++idx;
    return idx;
}

namespace {

void check_samples(std::span<const Outcome> samples, std::size_t bin_count) {
    if (samples.empty()) throw InputError("calibration metric of an empty sample");
    if (bin_count == 0) throw InputError("bin_count must be positive");
    for (const auto& s : samples) {
        if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) {
            throw InputError(fmt::format("confidence {} outside [0, 1]", s.confidence));
        }
    }
}

struct BinAccumulator {
    std::size_t n = 0;
    double conf_sum = 0.0;
    double correct_sum = 0.0;
};

std::vector<BinAccumulator> accumulate(std::span<const Outcome> samples, const BinningSpec& spec,
                                       std::vector<std::pair<double, double>>* edges) {
    std::vector<BinAccumulator> bins(spec.bin_count);
    if (spec.scheme == BinScheme::EqualWidth) {
        for (const auto& s : samples) {
            auto& bin = bins[equal_width_bin(s.confidence, spec.bin_count)];
            ++bin.n;
            bin.conf_sum += s.confidence;
            bin.correct_sum += s.correct ? 1.0 : 0.0;
        }
        if (edges) {
            const double b = static_cast<double>(spec.bin_count);
            for (std::size_t i = 0; i < spec.bin_count; ++i) {
                edges->emplace_back(static_cast<double>(i) / b, static_cast<double>(i + 1) / b);
            }
        }
        return bins;
    }

    std::vector<Outcome> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end(), [](const Outcome& a, const Outcome& b) {
        if (a.confidence != b.confidence) return a.confidence < b.confidence;
        return a.correct < b.correct;
    });
    const std::size_t base = sorted.size() / spec.bin_count;
    const std::size_t extra = sorted.size() % spec.bin_count;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < spec.bin_count; ++i) {
        const std::size_t size = base + (i < extra ? 1 : 0);
        for (std::size_t j = pos; j < pos + size; ++j) {
            ++bins[i].n;
            bins[i].conf_sum += sorted[j].confidence;
            bins[i].correct_sum += sorted[j].correct ? 1.0 : 0.0;
        }
        if (edges) {
            if (size > 0) {
                edges->emplace_back(sorted[pos].confidence, sorted[pos + size - 1].confidence);
            } else {
                edges->emplace_back(0.0, 0.0);
            }
        }
        pos += size;
    }
    return bins;
}

}  // namespace

std::vector<BinSummary> reliability_bins(std::span<const Outcome> samples, const BinningSpec& spec) {
    if (spec.bin_count == 0) throw InputError("bin_count must be positive");
    std::vector<std::pair<double, double>> edges;
    const auto bins = accumulate(samples, spec, &edges);
    std::vector<BinSummary> out(bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) {
        out[i].lo = edges[i].first;
        out[i].hi = edges[i].second;
        out[i].n = bins[i].n;
        if (bins[i].n > 0) {
            const double n = static_cast<double>(bins[i].n);
            out[i].acc = bins[i].correct_sum / n;
            out[i].conf = bins[i].conf_sum / n;
        }
    }
    return out;
}

double ece(std::span<const Outcome> samples, const BinningSpec& spec) {
    check_samples(samples, spec.bin_count);
    const auto bins = accumulate(samples, spec, nullptr);
    const double n = static_cast<double>(samples.size());
    double total = 0.0;
    for (const auto& bin : bins) {
        if (bin.n == 0) continue;
        const double nb = static_cast<double>(bin.n);
        total += (nb / n) * std::abs(bin.correct_sum / nb - bin.conf_sum / nb);
    }
    return total;
}

double mce(std::span<const Outcome> samples, const BinningSpec& spec) {
    check_samples(samples, spec.bin_count);
    double worst = 0.0;
    for (const auto& bin : accumulate(samples, spec, nullptr)) {
        if (bin.n == 0 || bin.n < spec.min_support) continue;
        const double nb = static_cast<double>(bin.n);
        worst = std::max(worst, std::abs(bin.correct_sum / nb - bin.conf_sum / nb));
    }
    return worst;
}

TertileSplit tertile_split(std::span<const double> rho, double q_low, double q_high) {
    TertileSplit split;
    split.q_low = q_low;
    split.q_high = q_high;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        switch (assign_tertile(rho[i], q_low, q_high)) {
            case Tertile::Low: split.low.push_back(i); break;
            case Tertile::Mid: split.mid.push_back(i); break;
            case Tertile::High: split.high.push_back(i); break;
        }
    }
    return split;
}

TertileSplit tertile_split(std::span<const double> rho) {
    if (rho.size() < 3) throw InputError("tertile split needs at least 3 samples");
    std::vector<double> sorted(rho.begin(), rho.end());
    std::sort(sorted.begin(), sorted.end());
    auto split = tertile_split(rho, quantile_sorted(sorted, 0.33), quantile_sorted(sorted, 0.67));
    if (split.low.empty() || split.mid.empty() || split.high.empty()) {
        throw ComputeError(fmt::format("degenerate tertiles (sizes {}/{}/{})", split.low.size(), split.mid.size(),
                                       split.high.size()));
    }
    return split;
}

WorstTertileResult worst_tertile_ece(std::span<const Outcome> samples, std::span<const double> rho,
                                     const BinningSpec& spec) {
    if (samples.size() != rho.size()) throw InputError("rho and samples differ in length");
    if (samples.size() < 3) throw InputError("worst-tertile ECE needs at least 3 samples");
    WorstTertileResult out;
    out.split = tertile_split(rho);
    const std::array<const std::vector<std::size_t>*, 3> sets{&out.split.low, &out.split.mid, &out.split.high};
    for (std::size_t t = 0; t < 3; ++t) {
        std::vector<Outcome> sub;
        sub.reserve(sets[t]->size());
        for (auto i : *sets[t]) sub.push_back(samples[i]);
        out.per_tertile[t] = ece(sub, spec);
    }
    out.worst = *std::max_element(out.per_tertile.begin(), out.per_tertile.end());
    return out;
}

double classwise_ece(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                     const BinningSpec& spec) {
    if (probs.empty()) throw InputError("classwise ECE of an empty sample");
    const std::size_t k = probs[0].size();
    if (k < 2) throw InputError("classwise ECE needs K >= 2");
    double total = 0.0;
    std::vector<Outcome> per_class(probs.size());
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < probs.size(); ++i) per_class[i] = {probs[i][c], labels[i] == c};
        total += ece(per_class, spec);
    }
    return total / static_cast<double>(k);
}

namespace {

constexpr std::size_t kSmoothGrid = 200;

struct SmoothGrid {
    std::vector<double> residual;  // sum of (correct - conf) per bucket
    std::vector<std::size_t> occupied;
    double n = 0.0;
};

SmoothGrid bucket_residuals(std::span<const Outcome> samples) {
    SmoothGrid grid;
    grid.residual.assign(kSmoothGrid, 0.0);
    std::vector<bool> used(kSmoothGrid, false);
    for (const auto& s : samples) {
        const auto b = equal_width_bin(s.confidence, kSmoothGrid);
        grid.residual[b] += (s.correct ? 1.0 : 0.0) - s.confidence;
        used[b] = true;
    }
    for (std::size_t b = 0; b < kSmoothGrid; ++b) {
        if (used[b]) grid.occupied.push_back(b);
    }
    grid.n = static_cast<double>(samples.size());
    return grid;
}

double smooth_ece_at(const SmoothGrid& grid, double sigma) {
    const auto m = static_cast<long>(kSmoothGrid);
    const double md = static_cast<double>(kSmoothGrid);
    // phi(offset / (M sigma)) for integer offsets in [-2M, 2M]; bucket centres
    // sit at (j + 1/2) / M, so direct and reflected distances are integral.
    std::vector<double> table(static_cast<std::size_t>(4 * m + 1));
    for (long d = -2 * m; d <= 2 * m; ++d) {
        const double u = static_cast<double>(d) / (md * sigma);
        table[static_cast<std::size_t>(d + 2 * m)] = std::exp(-0.5 * u * u);
    }
    auto phi = [&](long d) { return table[static_cast<std::size_t>(d + 2 * m)]; };

    std::vector<double> density(kSmoothGrid, 0.0);
    std::vector<double> weights(kSmoothGrid);
    for (auto k : grid.occupied) {
        const auto kk = static_cast<long>(k);
        double total = 0.0;
        for (long j = 0; j < m; ++j) {
            // images of the source at -s (reflection at 0) and 2 - s (at 1)
            const double w = phi(j - kk) + phi(j + kk + 1) + phi(j + kk + 1 - 2 * m);
            weights[static_cast<std::size_t>(j)] = w;
            total += w;
        }
        if (total <= 0.0) continue;
        // Normalize each source's kernel to unit mass on [0, 1].
        const double scale = grid.residual[k] * md / (total * grid.n);
        for (std::size_t j = 0; j < kSmoothGrid; ++j) density[j] += weights[j] * scale;
    }
    double integral = 0.0;
    for (double v : density) integral += std::abs(v);
    return integral / md;
}

}  // namespace

SmoothEceResult smooth_ece(std::span<const Outcome> samples, std::optional<double> sigma) {
    check_samples(samples, 1);
    if (samples.size() < 2) throw InputError("smooth ECE needs at least 2 samples");
    const auto grid = bucket_residuals(samples);
    SmoothEceResult out;
    if (sigma) {
        if (!(*sigma > 0.0)) throw InputError("kernel sigma must be positive");
        out.sigma = *sigma;
        out.value = smooth_ece_at(grid, *sigma);
        return out;
    }

    double lo = std::log(1e-4);
    double hi = 0.0;
    const auto gap = [&](double log_sigma) {
        const double s = std::exp(log_sigma);
        return smooth_ece_at(grid, s) - s;
    };
    const double g_lo = gap(lo);
    const double g_hi = gap(hi);
    if (g_lo <= 0.0 || g_hi >= 0.0) {
        out.bracketed = false;
        out.sigma = g_lo <= 0.0 ? 1e-4 : 1.0;
        out.value = smooth_ece_at(grid, out.sigma);
        return out;
    }
    while (hi - lo > 1e-7) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.sigma = std::exp(0.5 * (lo + hi));
    out.value = smooth_ece_at(grid, out.sigma);
    return out;
}

double nll(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) total -= std::log(std::max(probs[i][labels[i]], 1e-12));
    return total / static_cast<double>(probs.size());
}

double brier(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        for (std::size_t k = 0; k < probs[i].size(); ++k) {
            const double d = probs[i][k] - (labels[i] == k ? 1.0 : 0.0);
            total += d * d;
        }
    }
    return total / static_cast<double>(probs.size());
}

double acc1(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) hits += argmax(probs[i]) == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(probs.size());
}

std::vector<Outcome> outcomes(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels) {
    std::vector<Outcome> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto pred = argmax(probs[i]);
        out[i] = {probs[i][pred], pred == labels[i]};
    }
    return out;
}

MetricReport evaluate_metrics(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels,
                              std::optional<std::span<const double>> rho, std::size_t bin_count) {
    if (probs.size() != labels.size()) throw InputError("probs and labels differ in length");
    const auto samples = outcomes(probs, labels);
    MetricReport r;
    r.ece = ece(samples, {bin_count, BinScheme::EqualWidth, 0});
    r.adaece = ece(samples, {bin_count, BinScheme::EqualMass, 0});
    r.mce = mce(samples, {bin_count, BinScheme::EqualWidth, 5});
    r.classwise_ece = classwise_ece(probs, labels, {bin_count, BinScheme::EqualWidth, 0});
    if (samples.size() >= 2) {
        const auto s = smooth_ece(samples);
        r.smooth_ece = s.value;
        r.smooth_ece_sigma = s.sigma;
    }
    r.nll = nll(probs, labels);
    r.brier = brier(probs, labels);
    r.acc1 = acc1(probs, labels);
    if (rho) {
        const auto wt = worst_tertile_ece(samples, *rho, {bin_count, BinScheme::EqualWidth, 0});
        r.worst_tertile_ece = wt.worst;
        r.per_tertile_ece = wt.per_tertile;
    }
    return r;
}

}  // namespace routecal
