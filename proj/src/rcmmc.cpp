#include "routecal/rcmmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>

#include "routecal/errors.hpp"
#include "routecal/features.hpp"
#include "routecal/record.hpp"
#include "routecal/stats.hpp"

namespace routecal {
namespace {

std::vector<double> quantile_cuts(std::vector<double> values, std::size_t bins) {
    std::sort(values.begin(), values.end());
    std::vector<double> cuts;
    for (std::size_t j = 1; j < bins; ++j) {
        cuts.push_back(quantile_sorted(values, static_cast<double>(j) / static_cast<double>(bins)));
    }
    return cuts;
}

std::size_t locate(const std::vector<double>& cuts, double value) {
    return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

double mean_top(LogitRows logits, const std::vector<std::size_t>& members, double log_tau) {
    const double tau = std::exp(log_tau);
    double total = 0.0;
    for (auto i : members) {
        const auto p = softmax(logits[i], tau);
        total += p[argmax(logits[i])];
    }
    return total / static_cast<double>(members.size());
}

// Mean top-class probability falls as tau grows.
double solve_mean_top(LogitRows logits, const std::vector<std::size_t>& members, double target) {
    double lo = -8.0;
    double hi = 8.0;
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mean_top(logits, members, mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

RcmmcPosition rcmmc_position(std::span<const double> logits) {
    const auto p = softmax(logits);
    std::vector<double> sorted(p);
    std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
    return {sorted[0] - sorted[1], normalized_entropy(p)};
}

std::size_t rcmmc_cell(const RcmmcModel& model, RcmmcPosition pos) {
    return locate(model.entropy_cuts, pos.entropy) * model.margin_bins + locate(model.margin_cuts, pos.margin);
}

RcmmcModel fit_rcmmc(LogitRows logits, std::span<const std::size_t> labels, std::size_t margin_bins,
                     std::size_t entropy_bins) {
    if (margin_bins == 0 || entropy_bins == 0) throw InputError("rcmmc: grid dimensions must be positive");
    if (logits.size() != labels.size()) throw InputError("logits and labels differ in length");
    if (logits.size() < margin_bins * entropy_bins) {
        throw InputError("rcmmc: calibration set smaller than the number of cells");
    }
    RcmmcModel model;
    model.margin_bins = margin_bins;
    model.entropy_bins = entropy_bins;

    std::vector<RcmmcPosition> pos;
    pos.reserve(logits.size());
    std::vector<double> margins;
    std::vector<double> entropies;
    for (const auto& z : logits) {
        pos.push_back(rcmmc_position(z));
        margins.push_back(pos.back().margin);
        entropies.push_back(pos.back().entropy);
    }
    model.margin_cuts = quantile_cuts(margins, margin_bins);
    model.entropy_cuts = quantile_cuts(entropies, entropy_bins);

    const std::size_t cells = margin_bins * entropy_bins;
    std::vector<std::vector<std::size_t>> members(cells);
    for (std::size_t i = 0; i < pos.size(); ++i) members[rcmmc_cell(model, pos[i])].push_back(i);

    model.tau.assign(cells, 1.0);
    model.counts.assign(cells, 0);
    std::vector<std::vector<double>> cell_logits;
    std::vector<std::size_t> cell_labels;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        model.counts[cell] = members[cell].size();
        if (members[cell].empty()) continue;
        cell_logits.clear();
        cell_labels.clear();
        for (auto i : members[cell]) {
            cell_logits.push_back(logits[i]);
            cell_labels.push_back(labels[i]);
        }
        model.tau[cell] = fit_temperature(cell_logits, cell_labels).tau;
    }

    for (std::size_t row = 0; row < entropy_bins; ++row) {
        std::vector<std::size_t> occupied;
        std::vector<double> conf;
        std::vector<double> weight;
        for (std::size_t col = 0; col < margin_bins; ++col) {
            const std::size_t cell = row * margin_bins + col;
            if (members[cell].empty()) continue;
            occupied.push_back(cell);
            conf.push_back(mean_top(logits, members[cell], std::log(model.tau[cell])));
            weight.push_back(static_cast<double>(members[cell].size()));
        }
        const auto fitted = pava(conf, weight);
        for (std::size_t j = 0; j < occupied.size(); ++j) {
            if (fitted[j] == conf[j]) continue;
            model.tau[occupied[j]] = std::exp(solve_mean_top(logits, members[occupied[j]], fitted[j]));
            ++model.projected_cells;
        }
    }

    const auto mid_m = static_cast<long>(margin_bins / 2);
    const auto mid_e = static_cast<long>(entropy_bins / 2);
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), 0);
    const auto distance = [&](std::size_t cell) {
        const auto m = static_cast<long>(cell % margin_bins);
        const auto e = static_cast<long>(cell / margin_bins);
        return std::labs(m - mid_m) + std::labs(e - mid_e);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distance(a) < distance(b); });
    std::optional<double> global_tau;
    for (auto cell : order) {
        if (!members[cell].empty()) continue;
        ++model.filled_cells;
        auto m = static_cast<long>(cell % margin_bins);
        auto e = static_cast<long>(cell / margin_bins);
        if (m == mid_m && e == mid_e) {
            if (!global_tau) global_tau = fit_temperature(logits, labels).tau;
            model.tau[cell] = *global_tau;
            continue;
        }
        if (m != mid_m) {
            m += m < mid_m ? 1 : -1;
        } else {
            e += e < mid_e ? 1 : -1;
        }
        model.tau[cell] = model.tau[static_cast<std::size_t>(e) * margin_bins + static_cast<std::size_t>(m)];
    }
    return model;
}

std::vector<double> apply_rcmmc(const RcmmcModel& model, std::span<const double> logits) {
    const auto cell = rcmmc_cell(model, rcmmc_position(logits));
    return softmax(logits, model.tau[cell]);
}

}  // namespace routecal
