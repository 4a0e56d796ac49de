#include "routecal/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "routecal/errors.hpp"
#include "routecal/metrics.hpp"
#include "routecal/record.hpp"
#include "routecal/rng.hpp"
#include "routecal/stats.hpp"

namespace routecal {

double scott_bandwidth(double sigma, std::size_t n, std::size_t dims) {
    return sigma * std::pow(static_cast<double>(n), -1.0 / static_cast<double>(dims + 4));
}

namespace {

void check_kernel_inputs(std::span<const double> c, std::span<const double> r, std::span<const double> t) {
    if (c.empty()) throw InputError("kernel: empty calibration set");
    if (c.size() != t.size() || (!r.empty() && r.size() != c.size())) {
        throw InputError("kernel: feature and target lengths differ");
    }
}

double scott_or_floor(std::span<const double> values, std::size_t dims, const char* name,
                      std::vector<std::string>& warnings) {
    const double sigma = sample_std(values);
    if (sigma > 0.0) return scott_bandwidth(sigma, values.size(), dims);
    warnings.push_back(fmt::format("feature {} is constant on the calibration set; bandwidth set to 1e-3", name));
    return 1e-3;
}

}  // namespace

KernelModel nw_fit_fixed(std::span<const double> c, std::span<const double> r, std::span<const double> t,
                         double h_c, double h_r) {
    check_kernel_inputs(c, r, t);
    if (!(h_c > 0.0) || (!r.empty() && !(h_r > 0.0))) throw InputError("kernel: bandwidths must be positive");
    KernelModel model;
    model.c.assign(c.begin(), c.end());
    model.r.assign(r.begin(), r.end());
    model.t.assign(t.begin(), t.end());
    model.h_c = h_c;
    model.h_r = r.empty() ? 1.0 : h_r;
    return model;
}

KernelModel nw_fit(std::span<const double> c, std::span<const double> r, std::span<const double> t,
                   double multiplier) {
    check_kernel_inputs(c, r, t);
    if (!(multiplier > 0.0)) throw InputError("kernel: bandwidth multiplier must be positive");
    const std::size_t dims = r.empty() ? 1 : 2;
    std::vector<std::string> warnings;
    const double h_c = scott_or_floor(c, dims, "c", warnings) * multiplier;
    const double h_r = r.empty() ? 1.0 : scott_or_floor(r, dims, "r", warnings) * multiplier;
    auto model = nw_fit_fixed(c, r, t, h_c, h_r);
    model.warnings = std::move(warnings);
    return model;
}

double nw_predict(const KernelModel& model, double c, double r) {
    const bool two_d = model.two_dimensional();
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < model.c.size(); ++i) {
        const double dc = (c - model.c[i]) / model.h_c;
        double q = dc * dc;
        if (two_d) {
            const double dr = (r - model.r[i]) / model.h_r;
            q += dr * dr;
        }
        const double w = std::exp(-0.5 * q);
        num += w * model.t[i];
        den += w;
    }
    if (den < 1e-300) {
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < model.c.size(); ++i) {
            const double dc = (c - model.c[i]) / model.h_c;
            double q = dc * dc;
            if (two_d) {
                const double dr = (r - model.r[i]) / model.h_r;
                q += dr * dr;
            }
            if (q < best) {
                best = q;
                nearest = i;
            }
        }
        return std::clamp(model.t[nearest], 0.0, 1.0);
    }
    return std::clamp(num / den, 0.0, 1.0);
}

ClipStats& ClipStats::operator+=(const ClipStats& other) noexcept {
    total += other.total;
    lower += other.lower;
    upper += other.upper;
    degenerate += other.degenerate;
    unattained += other.unattained;
    return *this;
}

std::vector<double> apply_condcal(const KernelModel& model, std::span<const double> logits, double r,
                                  ClipStats& stats) {
    const auto base = softmax_confidence(logits);
    const std::size_t k = logits.size();
    ++stats.total;
    if (std::all_of(logits.begin(), logits.end(), [&](double z) { return z == logits[0]; })) {
        ++stats.degenerate;
        return std::vector<double>(k, 1.0 / static_cast<double>(k));
    }
    const double lo = 1.0 / static_cast<double>(k) + kClipEpsilon;
    const double hi = 1.0 - kClipEpsilon;
    double target = nw_predict(model, base.confidence, r);
    if (target < lo) {
        target = lo;
        ++stats.lower;
    } else if (target > hi) {
        target = hi;
        ++stats.upper;
    }
    const auto solved = solve_temperature(logits, base.pred, target);
    if (!solved.converged) ++stats.unattained;
    return softmax(logits, solved.tau);
}

namespace {

struct Triples {
    std::vector<double> c;
    std::vector<double> r;
    std::vector<double> t;
};

Triples triples(const CondCalInputs& inputs, std::span<const std::size_t> rows) {
    Triples out;
    for (auto i : rows) {
        const auto s = softmax_confidence(inputs.logits[i]);
        out.c.push_back(s.confidence);
        out.t.push_back(s.pred == inputs.labels[i] ? 1.0 : 0.0);
        if (!inputs.r.empty()) out.r.push_back(inputs.r[i]);
    }
    return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

void check_inputs(const CondCalInputs& inputs) {
    if (inputs.logits.empty()) throw InputError("kernel: empty calibration set");
    if (inputs.labels.size() != inputs.logits.size() ||
        (!inputs.r.empty() && inputs.r.size() != inputs.logits.size())) {
        throw InputError("kernel: logits, labels and routing feature differ in length");
    }
}

std::vector<std::vector<double>> calibrate_rows(const KernelModel& model, const CondCalInputs& inputs,
                                                std::span<const std::size_t> rows) {
    ClipStats unused;
    std::vector<std::vector<double>> probs;
    probs.reserve(rows.size());
    for (auto i : rows) {
        probs.push_back(apply_condcal(model, inputs.logits[i], inputs.r.empty() ? 0.0 : inputs.r[i], unused));
    }
    return probs;
}

}  // namespace

KernelModel fit_condcal(const CondCalInputs& inputs, double multiplier) {
    check_inputs(inputs);
    const auto rows = all_rows(inputs.logits.size());
    const auto data = triples(inputs, rows);
    return nw_fit(data.c, data.r, data.t, multiplier);
}

BandwidthSelection select_bandwidth(const CondCalInputs& cal, const KernelSpec& spec, std::uint64_t seed,
                                    const CondCalInputs* heldout) {
    BandwidthSelection out;
    switch (spec.mode) {
        case BandwidthMode::FixedScott:
            out.multiplier = 1.0;
            return out;
        case BandwidthMode::ScottTimes:
            if (!(spec.multiplier > 0.0)) throw InputError("bandwidth multiplier must be positive");
            out.multiplier = spec.multiplier;
            return out;
        case BandwidthMode::CvNll:
        case BandwidthMode::OracleEce:
            break;
    }
    check_inputs(cal);
    out.grid.assign(std::begin(kBandwidthGrid), std::end(kBandwidthGrid));

    if (spec.mode == BandwidthMode::OracleEce) {
        if (heldout == nullptr) throw InputError("oracle-ece bandwidth selection needs a held-out set");
        check_inputs(*heldout);
        out.diagnostic_only = true;
        const auto test_rows = all_rows(heldout->logits.size());
        for (double m : out.grid) {
            const auto model = fit_condcal(cal, m);
            const auto probs = calibrate_rows(model, *heldout, test_rows);
            const auto samples = outcomes(probs, heldout->labels);
            out.scores.push_back(ece(samples));
        }
    } else {
        const std::size_t n = cal.logits.size();
        if (n < 2) throw InputError("cv-nll bandwidth selection needs at least two calibration samples");
        auto order = all_rows(n);
        auto rng = derive_stream(seed, streams::kFolds);
        rng.shuffle(std::span<std::size_t>(order));
        constexpr std::size_t kFolds = 5;
        std::vector<std::size_t> fold(n);
        for (std::size_t j = 0; j < n; ++j) fold[order[j]] = j % kFolds;

        for (double m : out.grid) {
            double total = 0.0;
            std::size_t used = 0;
            for (std::size_t f = 0; f < kFolds; ++f) {
                std::vector<std::size_t> train;
                std::vector<std::size_t> test;
                for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(i);
                if (test.empty() || train.empty()) continue;
                const auto data = triples(cal, train);
                const auto model = nw_fit(data.c, data.r, data.t, m);
                const auto probs = calibrate_rows(model, cal, test);
                std::vector<std::size_t> labels;
                for (auto i : test) labels.push_back(cal.labels[i]);
                total += nll(probs, labels);
                ++used;
            }
            out.scores.push_back(total / static_cast<double>(used));
        }
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < out.scores.size(); ++j) {
        if (out.scores[j] < out.scores[best]) best = j;
    }
    out.multiplier = out.grid[best];
    return out;
}

}  // namespace routecal
