#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "routecal/record.hpp"
#include "routecal/rng.hpp"
#include "routecal/stats.hpp"

namespace routecal {

struct ProbeConfig {
    std::size_t hidden_width = 16;
    std::size_t epochs = 200;
    double learning_rate = 1e-2;
    double weight_decay = 1e-4;
    std::uint64_t split_seed = 42;
    double split_fraction = 0.5;
    double ridge_lambda = 1e-3;
    /// Root seed for MLP initialization and the routing shuffle.
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

/// |confidence - 1{pred = label}|.
double probe_target(const PredictionRecord& record);

/// Dense row-major design matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

struct RidgeModel {
    double intercept = 0.0;
    std::vector<double> weights;
};

/// Closed-form ridge with an unpenalized intercept, solved by Cholesky.
/// Throws InputError when the regularized system is not positive definite.
RidgeModel fit_ridge(const FeatureMatrix& x, std::span<const double> y, double lambda);
double ridge_predict(const RidgeModel& model, std::span<const double> row);

/// d -> hidden (ReLU) -> 1 regressor.
struct MlpModel {
    std::size_t inputs = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;  // hidden x inputs, row-major
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;
    /// Training MSE at the start of each epoch.
    std::vector<double> loss_history;

    std::size_t parameter_count() const noexcept { return hidden * inputs + 2 * hidden + 1; }
};

/// Weights and biases uniform on +-1/sqrt(fan_in).
MlpModel init_mlp(std::size_t inputs, std::size_t hidden, RngStream& rng);

double mlp_predict(const MlpModel& model, std::span<const double> row);

/// Mean squared error over the rows of `x`.
double mlp_loss(const MlpModel& model, const FeatureMatrix& x, std::span<const double> y);

/// Parameters flattened as w1, b1, w2, b2.
std::vector<double> mlp_parameters(const MlpModel& model);
void set_mlp_parameters(MlpModel& model, std::span<const double> params);

/// Analytic gradient of mlp_loss in the flattened parameter order.
std::vector<double> mlp_gradient(const MlpModel& model, const FeatureMatrix& x, std::span<const double> y);

/// Full-batch Adam (0.9, 0.999, 1e-8) with decoupled weight decay on every
/// parameter. Throws ComputeError if the loss becomes non-finite.
MlpModel fit_mlp(const FeatureMatrix& x, std::span<const double> y, const ProbeConfig& config, RngStream& rng);

/// Applies one shared permutation to columns [first_col, cols) of every row;
/// the remaining columns stay in place.
FeatureMatrix shuffle_columns(const FeatureMatrix& x, std::size_t first_col, RngStream& rng);

struct RSquared {
    double value = 0.0;
    /// SST of the held-out targets is zero.
    bool undefined = false;
};

/// 1 - SSE/SST with SST around the mean of `y`.
RSquared r_squared(std::span<const double> y, std::span<const double> prediction);

struct ProbeFit {
    std::string name;
    RSquared r2;
    double train_sse = 0.0;
    /// Per-epoch training loss; empty for the ridge regressors.
    std::vector<double> loss_history;
};

struct ProbeReport {
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    /// conf-lin, conf-mlp, full-lin, full-mlp, shuf-full-mlp.
    std::vector<ProbeFit> fits;
    /// Spearman correlation of r_std with |conf - correct| over all records.
    SpearmanResult r_std_spearman;
    std::vector<double> r_std;
    std::vector<double> target;

    const ProbeFit& fit(const std::string& name) const;
};

/// Capacity-matched probe audit on a single train/held-out split.
ProbeReport run_audit(const Dataset& data, const ProbeConfig& config);

}  // namespace routecal
