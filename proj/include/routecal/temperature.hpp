#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace routecal {

using LogitRows = std::span<const std::vector<double>>;

/// Mean multiclass NLL of softmax(z / tau).
double temperature_nll(LogitRows logits, std::span<const std::size_t> labels, double tau);

struct TemperatureModel {
    double tau = 1.0;
    /// The optimum sits on an edge of the log-tau search interval [-4, 4].
    bool at_boundary = false;
};

/// Golden-section search on log tau in [-4, 4] (tolerance 1e-6) minimizing
/// mean NLL. Throws InputError on an empty calibration set.
TemperatureModel fit_temperature(LogitRows logits, std::span<const std::size_t> labels);

/// Diagonal vector scaling softmax(w .* z + b).
struct VectorScalingModel {
    std::vector<double> w;
    std::vector<double> b;
    std::size_t iterations = 0;
    double final_nll = 0.0;
};

double vector_scaling_nll(LogitRows logits, std::span<const std::size_t> labels, const VectorScalingModel& model);

/// Full-batch gradient descent with Armijo backtracking from w = 1, b = 0;
/// at most 500 iterations, stops when the gradient norm drops below 1e-8.
VectorScalingModel fit_vector_scaling(LogitRows logits, std::span<const std::size_t> labels);

std::vector<double> apply_vector_scaling(const VectorScalingModel& model, std::span<const double> logits);

/// One temperature per predicted class; a sample is scaled by the
/// temperature of its own argmax class, so the argmax never changes.
struct ClasswiseTemperatureModel {
    std::vector<double> tau;
};

/// tau_k minimizes the one-vs-rest binary NLL of softmax(z / tau)_k against
/// 1{y = k} over calibration samples predicted as k. Classes never predicted
/// on the calibration set fall back to the global temperature.
ClasswiseTemperatureModel fit_classwise_ts(LogitRows logits, std::span<const std::size_t> labels);

std::vector<double> apply_classwise_ts(const ClasswiseTemperatureModel& model, std::span<const double> logits);

/// Per-sample L2 logit normalization followed by a global multiplier:
/// softmax(tau * z / ||z||).
struct LcModel {
    double tau = 1.0;
};

/// 201-point log grid on [1e-2, 1e2], minimizing 15-bin equal-width ECE on
/// the calibration set; ties resolve to the smallest tau.
LcModel fit_lc(LogitRows logits, std::span<const std::size_t> labels);

/// Throws InputError for an all-zero logit vector.
std::vector<double> apply_lc(const LcModel& model, std::span<const double> logits);

/// Solution of softmax(z / tau)_pred = target.
struct TemperatureSolve {
    double tau = 1.0;
    double achieved = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Bisection on log tau starting from the bracket [-8, 8]. The bracket is
/// widened in steps of 8 (up to [-64, 64]) when the target lies outside the
/// range reachable inside it. Stops at |achieved - target| <= 1e-8 or after
/// 200 iterations.
TemperatureSolve solve_temperature(std::span<const double> logits, std::size_t pred, double target);

}  // namespace routecal
