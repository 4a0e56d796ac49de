#include "routecal/temperature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "routecal/errors.hpp"
#include "routecal/metrics.hpp"
#include "routecal/record.hpp"
#include "routecal/stats.hpp"

namespace routecal {
namespace {

constexpr double kLogTauMin = -4.0;
constexpr double kLogTauMax = 4.0;
constexpr double kLogTauTol = 1e-6;

double log_sum_exp(std::span<const double> z, double scale) {
    double top = z[0] * scale;
    for (double v : z) top = std::max(top, v * scale);
    double total = 0.0;
    for (double v : z) total += std::exp(v * scale - top);
    return top + std::log(total);
}

void check_cal(LogitRows logits, std::span<const std::size_t> labels) {
    if (logits.empty()) throw InputError("empty calibration set");
    if (logits.size() != labels.size()) throw InputError("logits and labels differ in length");
}

TemperatureModel minimize_log_tau(const std::function<double(double)>& objective) {
    const auto best = golden_section(objective, kLogTauMin, kLogTauMax, kLogTauTol);
    TemperatureModel model;
    model.tau = std::exp(best.x);
    model.at_boundary = best.x - kLogTauMin < 10 * kLogTauTol || kLogTauMax - best.x < 10 * kLogTauTol;
    return model;
}

}  // namespace

double temperature_nll(LogitRows logits, std::span<const std::size_t> labels, double tau) {
    const double scale = 1.0 / tau;
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        total += log_sum_exp(logits[i], scale) - logits[i][labels[i]] * scale;
    }
    return total / static_cast<double>(logits.size());
}

TemperatureModel fit_temperature(LogitRows logits, std::span<const std::size_t> labels) {
    check_cal(logits, labels);
    return minimize_log_tau([&](double log_tau) { return temperature_nll(logits, labels, std::exp(log_tau)); });
}

double vector_scaling_nll(LogitRows logits, std::span<const std::size_t> labels, const VectorScalingModel& model) {
    double total = 0.0;
    std::vector<double> scaled;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        scaled.resize(logits[i].size());
        for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = model.w[k] * logits[i][k] + model.b[k];
        total += log_sum_exp(scaled, 1.0) - scaled[labels[i]];
    }
    return total / static_cast<double>(logits.size());
}

VectorScalingModel fit_vector_scaling(LogitRows logits, std::span<const std::size_t> labels) {
    check_cal(logits, labels);
    const std::size_t k = logits[0].size();
    const double n = static_cast<double>(logits.size());
    VectorScalingModel model;
    model.w.assign(k, 1.0);
    model.b.assign(k, 0.0);

    std::vector<double> grad_w(k);
    std::vector<double> grad_b(k);
    double loss = vector_scaling_nll(logits, labels, model);
    double step = 1.0;
    for (std::size_t iter = 0; iter < 500; ++iter) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        std::vector<double> scaled(k);
        for (std::size_t i = 0; i < logits.size(); ++i) {
            for (std::size_t c = 0; c < k; ++c) scaled[c] = model.w[c] * logits[i][c] + model.b[c];
            const auto p = softmax(scaled);
            for (std::size_t c = 0; c < k; ++c) {
                const double residual = p[c] - (labels[i] == c ? 1.0 : 0.0);
                grad_w[c] += residual * logits[i][c] / n;
                grad_b[c] += residual / n;
            }
        }
        double norm2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) norm2 += grad_w[c] * grad_w[c] + grad_b[c] * grad_b[c];
        model.iterations = iter;
        if (std::sqrt(norm2) < 1e-8) break;

        VectorScalingModel trial = model;
        double trial_loss = loss;
        bool accepted = false;
        for (int halvings = 0; halvings < 60; ++halvings) {
            for (std::size_t c = 0; c < k; ++c) {
                trial.w[c] = model.w[c] - step * grad_w[c];
                trial.b[c] = model.b[c] - step * grad_b[c];
            }
            trial_loss = vector_scaling_nll(logits, labels, trial);
            if (trial_loss <= loss - 1e-4 * step * norm2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        model.w = trial.w;
        model.b = trial.b;
        loss = trial_loss;
        step *= 2.0;
        model.iterations = iter + 1;
    }
    model.final_nll = loss;
    return model;
}

std::vector<double> apply_vector_scaling(const VectorScalingModel& model, std::span<const double> logits) {
    std::vector<double> scaled(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) scaled[c] = model.w[c] * logits[c] + model.b[c];
    return softmax(scaled);
}

ClasswiseTemperatureModel fit_classwise_ts(LogitRows logits, std::span<const std::size_t> labels) {
    check_cal(logits, labels);
    const std::size_t k = logits[0].size();
    const double global_tau = fit_temperature(logits, labels).tau;
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < logits.size(); ++i) members[argmax(logits[i])].push_back(i);

    ClasswiseTemperatureModel model;
    model.tau.assign(k, global_tau);
    for (std::size_t c = 0; c < k; ++c) {
        if (members[c].empty()) continue;
        const auto objective = [&](double log_tau) {
            const double scale = std::exp(-log_tau);
            double total = 0.0;
            for (auto i : members[c]) {
                const double lse = log_sum_exp(logits[i], scale);
                const double log_p = logits[i][c] * scale - lse;
                // log(1 - p) via the remaining classes
                double rest = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    if (j != c) rest += std::exp(logits[i][j] * scale - lse);
                }
                const double log_q = std::log(std::max(rest, 1e-300));
                total -= labels[i] == c ? log_p : log_q;
            }
            return total / static_cast<double>(members[c].size());
        };
        model.tau[c] = minimize_log_tau(objective).tau;
    }
    return model;
}

std::vector<double> apply_classwise_ts(const ClasswiseTemperatureModel& model, std::span<const double> logits) {
    return softmax(logits, model.tau[argmax(logits)]);
}

namespace {

std::vector<double> unit_logits(std::span<const double> logits) {
    double norm2 = 0.0;
    for (double z : logits) norm2 += z * z;
    if (norm2 == 0.0) throw InputError("LC: all-zero logit vector cannot be normalized");
    const double norm = std::sqrt(norm2);
    std::vector<double> out(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] / norm;
    return out;
}

}  // namespace

LcModel fit_lc(LogitRows logits, std::span<const std::size_t> labels) {
    check_cal(logits, labels);
    std::vector<std::vector<double>> unit;
    unit.reserve(logits.size());
    for (const auto& z : logits) unit.push_back(unit_logits(z));

    LcModel best;
    double best_ece = std::numeric_limits<double>::infinity();
    std::vector<Outcome> samples(logits.size());
    for (int g = 0; g <= 200; ++g) {
        const double tau = std::pow(10.0, -2.0 + 4.0 * g / 200.0);
        for (std::size_t i = 0; i < unit.size(); ++i) {
            const auto p = softmax(unit[i], 1.0 / tau);
            const auto pred = argmax(p);
            samples[i] = {p[pred], pred == labels[i]};
        }
        const double e = ece(samples);
        if (e < best_ece) {
            best_ece = e;
            best.tau = tau;
        }
    }
    return best;
}

std::vector<double> apply_lc(const LcModel& model, std::span<const double> logits) {
    return softmax(unit_logits(logits), 1.0 / model.tau);
}

TemperatureSolve solve_temperature(std::span<const double> logits, std::size_t pred, double target) {
    const auto top = [&](double log_tau) { return softmax(logits, std::exp(log_tau))[pred]; };
    double lo = -8.0;
    double hi = 8.0;
    // top() decreases in log tau.
    while (top(lo) < target && lo > -64.0) lo -= 8.0;
    while (top(hi) > target && hi < 64.0) hi += 8.0;

    TemperatureSolve out;
    for (std::size_t iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double value = top(mid);
        out.iterations = iter + 1;
        out.tau = std::exp(mid);
        out.achieved = value;
        if (std::abs(value - target) <= 1e-8) {
            out.converged = true;
            return out;
        }
        if (value > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return out;
}

}  // namespace routecal
