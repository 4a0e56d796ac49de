#include "routecal/probe.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "routecal/errors.hpp"
#include "routecal/features.hpp"
#include "routecal/parallel.hpp"
#include "routecal/split.hpp"

namespace routecal {

double probe_target(const PredictionRecord& record) {
    const auto s = softmax_confidence(record.logits);
    return std::abs(s.confidence - (s.pred == record.label ? 1.0 : 0.0));
}

RidgeModel fit_ridge(const FeatureMatrix& x, std::span<const double> y, double lambda) {
    if (x.rows != y.size()) throw InputError("ridge: design matrix and target differ in length");
    if (x.rows == 0) throw InputError("ridge: empty training set");
    if (!(lambda > 0.0)) throw InputError("ridge: lambda must be positive");
    const auto d = static_cast<Eigen::Index>(x.cols + 1);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x.rows), d);
    for (std::size_t i = 0; i < x.rows; ++i) {
        a(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = x.at(i, j);
        }
    }
    const Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::MatrixXd gram = a.transpose() * a;
    for (Eigen::Index j = 1; j < d; ++j) gram(j, j) += lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw InputError("ridge: regularized normal equations are singular; increase lambda");
    }
    const Eigen::VectorXd w = llt.solve(a.transpose() * target);
    RidgeModel model;
    model.intercept = w(0);
    model.weights.assign(w.data() + 1, w.data() + d);
    return model;
}

double ridge_predict(const RidgeModel& model, std::span<const double> row) {
    double out = model.intercept;
    for (std::size_t j = 0; j < row.size(); ++j) out += model.weights[j] * row[j];
    return out;
}

MlpModel init_mlp(std::size_t inputs, std::size_t hidden, RngStream& rng) {
    MlpModel m;
    m.inputs = inputs;
    m.hidden = hidden;
    const double a1 = 1.0 / std::sqrt(static_cast<double>(inputs));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    const auto draw = [&](double bound) { return (2.0 * rng.uniform() - 1.0) * bound; };
    m.w1.resize(hidden * inputs);
    for (auto& w : m.w1) w = draw(a1);
    m.b1.resize(hidden);
    for (auto& b : m.b1) b = draw(a1);
    m.w2.resize(hidden);
    for (auto& w : m.w2) w = draw(a2);
    m.b2 = draw(a2);
    return m;
}

double mlp_predict(const MlpModel& model, std::span<const double> row) {
    double out = model.b2;
    for (std::size_t h = 0; h < model.hidden; ++h) {
        double a = model.b1[h];
        for (std::size_t j = 0; j < model.inputs; ++j) a += model.w1[h * model.inputs + j] * row[j];
        if (a > 0.0) out += model.w2[h] * a;
    }
    return out;
}

double mlp_loss(const MlpModel& model, const FeatureMatrix& x, std::span<const double> y) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double e = mlp_predict(model, x.row(i)) - y[i];
        total += e * e;
    }
    return total / static_cast<double>(x.rows);
}

std::vector<double> mlp_parameters(const MlpModel& model) {
    std::vector<double> p;
    p.reserve(model.parameter_count());
    p.insert(p.end(), model.w1.begin(), model.w1.end());
    p.insert(p.end(), model.b1.begin(), model.b1.end());
    p.insert(p.end(), model.w2.begin(), model.w2.end());
    p.push_back(model.b2);
    return p;
}

void set_mlp_parameters(MlpModel& model, std::span<const double> params) {
    if (params.size() != model.parameter_count()) throw InputError("mlp: parameter vector has the wrong size");
    auto it = params.begin();
    std::copy(it, it + static_cast<std::ptrdiff_t>(model.w1.size()), model.w1.begin());
    it += static_cast<std::ptrdiff_t>(model.w1.size());
    std::copy(it, it + static_cast<std::ptrdiff_t>(model.hidden), model.b1.begin());
    it += static_cast<std::ptrdiff_t>(model.hidden);
    std::copy(it, it + static_cast<std::ptrdiff_t>(model.hidden), model.w2.begin());
    it += static_cast<std::ptrdiff_t>(model.hidden);
    model.b2 = *it;
}

std::vector<double> mlp_gradient(const MlpModel& model, const FeatureMatrix& x, std::span<const double> y) {
    const std::size_t d = model.inputs;
    const std::size_t hn = model.hidden;
    std::vector<double> g(model.parameter_count(), 0.0);
    double* gw1 = g.data();
    double* gb1 = gw1 + hn * d;
    double* gw2 = gb1 + hn;
    double* gb2 = gw2 + hn;
    std::vector<double> act(hn);
    const double scale = 2.0 / static_cast<double>(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        double out = model.b2;
        for (std::size_t h = 0; h < hn; ++h) {
            double a = model.b1[h];
            for (std::size_t j = 0; j < d; ++j) a += model.w1[h * d + j] * row[j];
            act[h] = a;
            if (a > 0.0) out += model.w2[h] * a;
        }
        const double delta = scale * (out - y[i]);
        *gb2 += delta;
        for (std::size_t h = 0; h < hn; ++h) {
            if (act[h] <= 0.0) continue;
            gw2[h] += delta * act[h];
            const double back = delta * model.w2[h];
            gb1[h] += back;
            for (std::size_t j = 0; j < d; ++j) gw1[h * d + j] += back * row[j];
        }
    }
    return g;
}

MlpModel fit_mlp(const FeatureMatrix& x, std::span<const double> y, const ProbeConfig& config, RngStream& rng) {
    if (x.rows != y.size() || x.rows == 0) throw InputError("mlp: empty or mismatched training set");
    for (double v : x.values) {
        if (!std::isfinite(v)) throw InputError("mlp: non-finite input");
    }
    auto model = init_mlp(x.cols, config.hidden_width, rng);
    auto params = mlp_parameters(model);
    std::vector<double> m(params.size(), 0.0);
    std::vector<double> v(params.size(), 0.0);
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    double beta1_t = 1.0;
    double beta2_t = 1.0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double loss = mlp_loss(model, x, y);
        if (!std::isfinite(loss)) throw ComputeError("mlp: training loss became non-finite at epoch " + std::to_string(epoch));
        model.loss_history.push_back(loss);
        const auto g = mlp_gradient(model, x, y);
        beta1_t *= kBeta1;
        beta2_t *= kBeta2;
        for (std::size_t k = 0; k < params.size(); ++k) {
            m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
            v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
            const double m_hat = m[k] / (1.0 - beta1_t);
            const double v_hat = v[k] / (1.0 - beta2_t);
            params[k] -= config.learning_rate * (m_hat / (std::sqrt(v_hat) + kEps) + config.weight_decay * params[k]);
        }
        set_mlp_parameters(model, params);
    }
    return model;
}

FeatureMatrix shuffle_columns(const FeatureMatrix& x, std::size_t first_col, RngStream& rng) {
    std::vector<std::size_t> perm(x.rows);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    FeatureMatrix out = x;
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = first_col; j < x.cols; ++j) out.at(i, j) = x.at(perm[i], j);
    }
    return out;
}

RSquared r_squared(std::span<const double> y, std::span<const double> prediction) {
    if (y.empty() || y.size() != prediction.size()) throw InputError("r_squared: empty or mismatched input");
    const double mu = mean(y);
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - prediction[i]) * (y[i] - prediction[i]);
        sst += (y[i] - mu) * (y[i] - mu);
    }
    if (sst == 0.0) return {std::nan(""), true};
    return {1.0 - sse / sst, false};
}

const ProbeFit& ProbeReport::fit(const std::string& name) const {
    for (const auto& f : fits) {
        if (f.name == name) return f;
    }
    throw InputError("no probe named " + name);
}

namespace {

FeatureMatrix design(const Dataset& data, std::span<const std::size_t> rows, bool full) {
    FeatureMatrix x;
    x.rows = rows.size();
    x.cols = full ? 1 + data.layer_count() : 1;
    x.values.reserve(x.rows * x.cols);
    for (auto i : rows) {
        const auto& rec = data[i];
        x.values.push_back(softmax_confidence(rec.logits).confidence);
        if (full) x.values.insert(x.values.end(), rec.entropy_profile->begin(), rec.entropy_profile->end());
    }
    return x;
}

double sse_of(const std::vector<double>& y, const std::vector<double>& pred) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
    return s;
}

}  // namespace

ProbeReport run_audit(const Dataset& data, const ProbeConfig& config) {
    if (!data.has_routing()) throw InputError("probe audit needs routing profiles");
    const auto idx = split_indices(data.size(), {config.split_seed, config.split_fraction});
    if (idx.cal.empty() || idx.test.empty()) throw InputError("probe audit: split left an empty fold");

    std::vector<double> y_train;
    std::vector<double> y_test;
    for (auto i : idx.cal) y_train.push_back(probe_target(data[i]));
    for (auto i : idx.test) y_test.push_back(probe_target(data[i]));

    const auto conf_train = design(data, idx.cal, false);
    const auto conf_test = design(data, idx.test, false);
    const auto full_train = design(data, idx.cal, true);
    const auto full_test = design(data, idx.test, true);
    auto shuffle_rng = derive_stream(config.seed, streams::kProbe + 2);
    const auto shuf_train = shuffle_columns(full_train, 1, shuffle_rng);

    ProbeReport report;
    report.train_size = idx.cal.size();
    report.test_size = idx.test.size();
    report.fits.resize(5);
    const char* names[] = {"conf-lin", "conf-mlp", "full-lin", "full-mlp", "shuf-full-mlp"};

    parallel_for(5, config.threads, [&](std::size_t k) {
        const bool full = k >= 2;
        const auto& train = k == 4 ? shuf_train : (full ? full_train : conf_train);
        const auto& test = full ? full_test : conf_test;
        const bool linear = k == 0 || k == 2;
        std::vector<double> fit_train(train.rows);
        std::vector<double> fit_test(test.rows);
        ProbeFit out;
        out.name = names[k];
        if (linear) {
            const auto model = fit_ridge(train, y_train, config.ridge_lambda);
            for (std::size_t i = 0; i < train.rows; ++i) fit_train[i] = ridge_predict(model, train.row(i));
            for (std::size_t i = 0; i < test.rows; ++i) fit_test[i] = ridge_predict(model, test.row(i));
        } else {
            // full-mlp and its shuffled control share one initialization.
            auto rng = derive_stream(config.seed, streams::kProbe + (full ? 1 : 0));
            const auto model = fit_mlp(train, y_train, config, rng);
            for (std::size_t i = 0; i < train.rows; ++i) fit_train[i] = mlp_predict(model, train.row(i));
            for (std::size_t i = 0; i < test.rows; ++i) fit_test[i] = mlp_predict(model, test.row(i));
            out.loss_history = model.loss_history;
        }
        out.train_sse = sse_of(y_train, fit_train);
        out.r2 = r_squared(y_test, fit_test);
        report.fits[k] = std::move(out);
    });

    for (const auto& rec : data.records()) {
        report.r_std.push_back(profile_std(*rec.entropy_profile));
        report.target.push_back(probe_target(rec));
    }
    report.r_std_spearman = spearman(report.r_std, report.target);
    return report;
}

}  // namespace routecal
