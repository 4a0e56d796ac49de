#include "routecal/commands.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "routecal/errors.hpp"
#include "routecal/features.hpp"
#include "routecal/io.hpp"
#include "routecal/parallel.hpp"
#include "routecal/rng.hpp"
#include "routecal/split.hpp"
#include "routecal/stats.hpp"
#include "routecal/synthetic.hpp"

namespace routecal {
namespace {

struct Loaded {
    Dataset data;
    std::string digest;
};

Loaded load(const std::filesystem::path& path) {
    if (path.empty()) throw InputError("no input file given");
    const auto bytes = read_file(path);
    std::istringstream in(bytes);
    Loaded out;
    out.data = path.extension() == ".csv" ? read_csv(in) : read_jsonl(in);
    if (out.data.empty()) throw InputError(fmt::format("'{}' holds no records", path.string()));
    out.digest = sha256_hex(bytes);
    return out;
}

Json common_json(const CommonOptions& common) {
    return Json{{"seed", common.seed}, {"out", common.out.string()}};
}

CalibrationSet calibration_set(const Dataset& data, std::span<const std::size_t> rows, std::span<const double> route) {
    CalibrationSet set;
    for (auto i : rows) {
        set.logits.push_back(data[i].logits);
        set.labels.push_back(data[i].label);
        if (!route.empty()) set.route.push_back(route[i]);
    }
    return set;
}

std::vector<double> pick(std::span<const double> column, std::span<const std::size_t> rows) {
    std::vector<double> out;
    if (column.empty()) return out;
    out.reserve(rows.size());
    for (auto i : rows) out.push_back(column[i]);
    return out;
}

// Feature column over the whole cache, or empty when it needs routing data
// that the dataset lacks.
std::vector<double> optional_feature(const Dataset& data, const Feature& feature) {
    if (uses_routing(feature.kind) && !data.has_routing()) return {};
    return feature_column(data, feature);
}

std::string fmt_or_empty(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

std::vector<BinSummary> tertile_bins(std::span<const Outcome> samples, std::span<const std::size_t> members,
                                     std::size_t bins) {
    std::vector<Outcome> subset;
    for (auto i : members) subset.push_back(samples[i]);
    if (subset.empty()) return {};
    return reliability_bins(subset, {bins, BinScheme::EqualWidth, 0});
}

// Emits the global and per-tertile reliability CSVs.
Json write_reliability(const std::filesystem::path& dir, std::span<const Outcome> samples,
                       std::span<const double> rho, std::size_t bins) {
    Json files = Json::array();
    write_text(dir / "reliability.csv", reliability_csv(reliability_bins(samples, {bins, BinScheme::EqualWidth, 0})));
    files.push_back("reliability.csv");
    if (rho.empty()) return files;
    const auto split = tertile_split(rho);
    const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
        {"reliability_low.csv", &split.low}, {"reliability_mid.csv", &split.mid}, {"reliability_high.csv", &split.high}};
    for (const auto& [name, members] : parts) {
        write_text(dir / name, reliability_csv(tertile_bins(samples, *members, bins)));
        files.push_back(name);
    }
    return files;
}

// Scalar feature evaluated from calibrated probabilities plus a profile.
double feature_from_probs(std::span<const double> probs, std::span<const double> h, FeatureKind kind) {
    const double conf = probs[argmax(probs)];
    switch (kind) {
        case FeatureKind::ConfidenceOnly: return conf;
        case FeatureKind::PredEntropy: return normalized_entropy(probs);
        case FeatureKind::AggEntropy: return profile_mean(h);
        case FeatureKind::Concentration: return 1.0 - profile_mean(h);
        case FeatureKind::LastLayerEntropy: return h.back();
        case FeatureKind::DepthVariance: return profile_std(h);
        case FeatureKind::EntropyTimesConfidence: return profile_mean(h) * conf;
    }
    return 0.0;
}

struct MetricBootstrap {
    std::size_t replicates = 0;
    std::size_t skipped = 0;
    std::vector<std::optional<Interval>> ci;  // in metric_names order
};

constexpr const char* kMetricNames[] = {"ece", "adaece", "mce", "classwise_ece", "smooth_ece",
                                        "nll", "brier", "acc1", "worst_tertile_ece"};

std::vector<double> metric_vector(const MetricReport& r) {
    return {r.ece, r.adaece, r.mce, r.classwise_ece, r.smooth_ece, r.nll, r.brier, r.acc1,
            r.worst_tertile_ece ? *r.worst_tertile_ece : std::nan("")};
}

// Percentile bootstrap over the evaluation rows. Replicate b draws from
// stream (seed, kBootstrap + b), so every method sees the same resamples.
MetricBootstrap bootstrap_metrics(const std::vector<std::vector<double>>& probs, const std::vector<std::size_t>& labels,
                                  std::span<const double> rho, std::size_t B, std::uint64_t seed, unsigned threads) {
    const std::size_t n = probs.size();
    const std::size_t m = std::size(kMetricNames);
    std::vector<std::vector<double>> values(B, std::vector<double>(m, std::nan("")));
    std::vector<char> skipped(B, 0);
    parallel_for(B, threads, [&](std::size_t b) {
        auto rng = derive_stream(seed, streams::kBootstrap + b);
        std::vector<std::vector<double>> p(n);
        std::vector<std::size_t> y(n);
        std::vector<double> r(rho.empty() ? 0 : n);
        for (std::size_t j = 0; j < n; ++j) {
            const auto i = static_cast<std::size_t>(rng.below(n));
            p[j] = probs[i];
            y[j] = labels[i];
            if (!rho.empty()) r[j] = rho[i];
        }
        try {
            const auto report = rho.empty() ? evaluate_metrics(p, y) : evaluate_metrics(p, y, std::span<const double>(r));
            values[b] = metric_vector(report);
        } catch (const ComputeError&) {
            skipped[b] = 1;
        }
    });
    MetricBootstrap out;
    out.replicates = B;
    out.skipped = static_cast<std::size_t>(std::count(skipped.begin(), skipped.end(), 1));
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<double> column;
        for (std::size_t b = 0; b < B; ++b) {
            if (!skipped[b] && !std::isnan(values[b][k])) column.push_back(values[b][k]);
        }
        if (column.empty()) {
            out.ci.emplace_back();
            continue;
        }
        std::sort(column.begin(), column.end());
        out.ci.push_back(Interval{quantile_sorted(column, 0.025), quantile_sorted(column, 0.975)});
    }
    return out;
}

Json ci_json(const MetricBootstrap& boot) {
    Json j;
    for (std::size_t k = 0; k < std::size(kMetricNames); ++k) {
        const auto& ci = boot.ci[k];
        j[kMetricNames[k]] = ci ? Json::array({ci->lo, ci->hi}) : Json(nullptr);
    }
    return j;
}

}  // namespace

KernelSpec parse_bw_mode(const std::string& name) {
    if (name == "scott" || name == "scott1") return {BandwidthMode::FixedScott, 1.0};
    if (name == "scott0.5") return {BandwidthMode::ScottTimes, 0.5};
    if (name == "scott2") return {BandwidthMode::ScottTimes, 2.0};
    if (name == "cv-nll") return {BandwidthMode::CvNll, 1.0};
    if (name == "oracle-ece") return {BandwidthMode::OracleEce, 1.0};
    throw InputError("unknown bandwidth mode: " + name);
}

Json cmd_validate(const ValidateOptions& options, const CommonOptions& common) {
    const auto loaded = load(options.input);
    auto config = common_json(common);
    config["input"] = options.input.string();
    Json report = report_header("validate", config, loaded.digest);
    report["records"] = loaded.data.size();
    report["classes"] = loaded.data.class_count();
    report["layers"] = loaded.data.layer_count();
    report["valid"] = true;
    return report;
}

Json cmd_features(const FeaturesOptions& options, const CommonOptions& common) {
    const auto loaded = load(options.input);
    const auto& data = loaded.data;
    const bool routing = data.has_routing();
    std::string csv = "id,conf,pred_entropy,r_agg,r_std,h_last,ent_x_conf\n";
    for (const auto& rec : data.records()) {
        csv += fmt::format("{},{},{}", rec.id, scalar_feature(rec, FeatureKind::ConfidenceOnly),
                           scalar_feature(rec, FeatureKind::PredEntropy));
        if (routing) {
            csv += fmt::format(",{},{},{},{}\n", scalar_feature(rec, FeatureKind::AggEntropy),
                               scalar_feature(rec, FeatureKind::DepthVariance),
                               scalar_feature(rec, FeatureKind::LastLayerEntropy),
                               scalar_feature(rec, FeatureKind::EntropyTimesConfidence));
        } else {
            csv += ",,,,\n";
        }
    }
    write_text(common.out / "features.csv", csv);
    auto config = common_json(common);
    config["input"] = options.input.string();
    Json report = report_header("features", config, loaded.digest);
    report["records"] = data.size();
    report["routing"] = routing;
    report["files"] = {"features.csv"};
    write_text(common.out / "features_report.json", dump(report));
    return report;
}

Json cmd_calibrate(const CalibrateOptions& options, const CommonOptions& common) {
    const auto loaded = load(options.input);
    const auto& data = loaded.data;
    const auto method = parse_method(options.method);
    const auto feature = parse_feature(options.feature);
    CalibratorOptions copts;
    copts.bandwidth = parse_bw_mode(options.bw_mode);
    copts.seed = common.seed;

    std::vector<double> route;
    if (needs_routing(method)) {
        if (!data.has_routing()) throw InputError("method " + options.method + " needs routing profiles");
        route = feature_column(data, feature);
    }
    const auto idx = split_indices(data.size(), {options.split_seed, options.cal_fraction});
    const auto cal = calibration_set(data, idx.cal, route);
    const auto test = calibration_set(data, idx.test, route);
    const auto fitted = fit_calibrator(method, cal, copts, &test);
    ClipStats clip;
    const auto probs = apply_calibrator(fitted, test, &clip);

    std::vector<ProbabilityRecord> out;
    for (std::size_t j = 0; j < idx.test.size(); ++j) {
        const auto& rec = data[idx.test[j]];
        out.push_back({rec.id, rec.label, probs[j], rec.entropy_profile.value_or(std::vector<double>{})});
    }
    std::ostringstream jsonl;
    write_probability_jsonl(jsonl, out);
    write_text(common.out / "calibrated.jsonl", jsonl.str());

    auto config = common_json(common);
    config["input"] = options.input.string();
    config["method"] = options.method;
    config["bw_mode"] = options.bw_mode;
    config["feature"] = options.feature;
    config["cal_fraction"] = options.cal_fraction;
    config["split_seed"] = options.split_seed;
    Json report = report_header("calibrate", config, loaded.digest);
    report["calibration_size"] = idx.cal.size();
    report["test_size"] = idx.test.size();
    report["model"] = to_json(fitted);
    report["files"] = {"calibrated.jsonl", "calibrate_report.json"};
    report["clip_stats"] = to_json(clip);
    write_text(common.out / "calibrate_report.json", dump(report));
    return report;
}

Json cmd_evaluate(const EvaluateOptions& options, const CommonOptions& common) {
    if (options.input.empty() == options.probs.empty()) {
        throw InputError("evaluate takes exactly one of --input and --probs");
    }
    const auto feature = parse_feature(options.feature);
    std::vector<std::vector<double>> probs;
    std::vector<std::size_t> labels;
    std::vector<double> rho;
    std::string digest;
    if (!options.input.empty()) {
        const auto loaded = load(options.input);
        digest = loaded.digest;
        for (const auto& rec : loaded.data.records()) {
            probs.push_back(softmax(rec.logits));
            labels.push_back(rec.label);
        }
        rho = optional_feature(loaded.data, feature);
    } else {
        const auto bytes = read_file(options.probs);
        digest = sha256_hex(bytes);
        std::istringstream in(bytes);
        const auto records = read_probability_jsonl(in);
        if (records.empty()) throw InputError("no probability records");
        const bool routing = std::all_of(records.begin(), records.end(),
                                         [](const ProbabilityRecord& r) { return !r.entropy_profile.empty(); });
        for (const auto& rec : records) {
            probs.push_back(rec.probs);
            labels.push_back(rec.label);
            if (routing || !uses_routing(feature.kind)) {
                rho.push_back(feature_from_probs(rec.probs, rec.entropy_profile, feature.kind));
            }
        }
        if (feature.minmax && !rho.empty()) rho = minmax_rescale(rho);
    }
    const auto metrics = rho.empty() ? evaluate_metrics(probs, labels, std::nullopt, options.bins)
                                     : evaluate_metrics(probs, labels, std::span<const double>(rho), options.bins);
    const auto samples = outcomes(probs, labels);
    const auto files = write_reliability(common.out, samples, rho, options.bins);

    auto config = common_json(common);
    config["input"] = options.input.string();
    config["probs"] = options.probs.string();
    config["feature"] = options.feature;
    config["bins"] = options.bins;
    Json report = report_header("evaluate", config, digest);
    report["samples"] = probs.size();
    report["metrics"] = to_json(metrics);
    if (rho.empty()) report["notice"] = "no routing data: worst-tertile ECE skipped";
    report["files"] = files;
    write_text(common.out / "evaluate_report.json", dump(report));
    return report;
}

Json cmd_diagnose(const DiagnoseOptions& options, const CommonOptions& common) {
    const auto loaded = load(options.input);
    ProtocolConfig pc;
    pc.feature = parse_feature(options.feature);
    pc.bin_count = options.bins;
    pc.min_support = options.min_support;
    pc.bootstrap = options.bootstrap;
    pc.permutations = options.permutations;
    pc.seed = common.seed;
    pc.threads = common.threads;
    const auto gap = run_protocol(loaded.data, pc);

    std::string curves = "bin_lo,bin_hi,n_low,acc_low,n_mid,acc_mid,n_high,acc_high,shared,gap,null_band_q975\n";
    for (std::size_t b = 0; b < gap.curves.bins.size(); ++b) {
        const auto& bin = gap.curves.bins[b];
        std::optional<double> band;
        if (gap.permutation && !std::isnan(gap.permutation->bin_band[b])) band = gap.permutation->bin_band[b];
        curves += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", bin.lo, bin.hi, bin.n[0], bin.acc[0], bin.n[1],
                              bin.acc[1], bin.n[2], bin.acc[2], bin.shared ? 1 : 0,
                              bin.shared ? fmt::format("{}", std::abs(bin.acc[0] - bin.acc[2])) : std::string(),
                              fmt_or_empty(band));
    }
    write_text(common.out / "curves.csv", curves);

    const auto rho = feature_column(loaded.data, pc.feature);
    const auto [lo_it, hi_it] = std::minmax_element(rho.begin(), rho.end());
    const double lo = *lo_it;
    const double width = (*hi_it - lo) / 30.0;
    std::vector<std::size_t> counts(30, 0);
    for (double v : rho) {
        auto b = width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
        ++counts[std::min<std::size_t>(b, 29)];
    }
    std::string hist = "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < 30; ++b) {
        hist += fmt::format("{},{},{}\n", lo + width * static_cast<double>(b), lo + width * static_cast<double>(b + 1),
                            counts[b]);
    }
    write_text(common.out / "rho_hist.csv", hist);

    auto config = common_json(common);
    config["input"] = options.input.string();
    config["feature"] = options.feature;
    config["bins"] = options.bins;
    config["min_support"] = options.min_support;
    config["bootstrap"] = options.bootstrap;
    config["perm"] = options.permutations;
    Json report = report_header("diagnose", config, loaded.digest);
    report["samples"] = loaded.data.size();
    report["gap_report"] = to_json(gap);
    report["files"] = {"curves.csv", "rho_hist.csv", "diagnose_report.json"};
    write_text(common.out / "diagnose_report.json", dump(report));
    return report;
}

Json cmd_probe(const ProbeOptions& options, const CommonOptions& common) {
    const auto loaded = load(options.input);
    auto pc = options.probe;
    pc.seed = common.seed;
    pc.threads = common.threads;
    const auto probe = run_audit(loaded.data, pc);

    Json files = Json::array();
    for (const auto& fit : probe.fits) {
        if (fit.loss_history.empty()) continue;
        std::string csv = "epoch,loss\n";
        for (std::size_t e = 0; e < fit.loss_history.size(); ++e) csv += fmt::format("{},{}\n", e, fit.loss_history[e]);
        const auto name = "loss_" + fit.name + ".csv";
        write_text(common.out / name, csv);
        files.push_back(name);
    }
    std::string pairs = "r_std,abs_conf_minus_correct\n";
    for (std::size_t i = 0; i < probe.r_std.size(); ++i) pairs += fmt::format("{},{}\n", probe.r_std[i], probe.target[i]);
    write_text(common.out / "pairs.csv", pairs);
    files.push_back("pairs.csv");
    files.push_back("probe_report.json");

    auto config = common_json(common);
    config["input"] = options.input.string();
    config["hidden_width"] = pc.hidden_width;
    config["epochs"] = pc.epochs;
    config["learning_rate"] = pc.learning_rate;
    config["weight_decay"] = pc.weight_decay;
    config["split_seed"] = pc.split_seed;
    config["split_fraction"] = pc.split_fraction;
    config["ridge_lambda"] = pc.ridge_lambda;
    Json report = report_header("probe", config, loaded.digest);
    report["train_size"] = probe.train_size;
    report["test_size"] = probe.test_size;
    Json fits = Json::array();
    for (const auto& fit : probe.fits) fits.push_back(to_json(fit));
    report["regressors"] = fits;
    for (const auto& fit : probe.fits) {
        const auto key = "r2_" + std::string(fit.name == "shuf-full-mlp" ? "shuf_full_mlp"
                                             : fit.name == "full-mlp"      ? "full_mlp"
                                             : fit.name == "full-lin"      ? "full_lin"
                                             : fit.name == "conf-mlp"      ? "conf_mlp"
                                                                           : "conf_lin");
        report[key] = fit.r2.undefined ? Json(nullptr) : Json(fit.r2.value);
    }
    report["spearman_r_std"] = {{"rho", probe.r_std_spearman.rho},
                                {"p_value", probe.r_std_spearman.p_value},
                                {"p_value_method", "t approximation, n - 2 degrees of freedom"}};
    report["files"] = files;
    write_text(common.out / "probe_report.json", dump(report));
    return report;
}

Json cmd_synth(const SynthOptions& options, const CommonOptions& common) {
    const auto spec = planted_preset(options.preset, options.n, common.seed);
    const auto planted = generate_planted(spec);
    std::ostringstream jsonl;
    write_jsonl(jsonl, planted.data);
    const auto text = jsonl.str();
    write_text(common.out / options.file, text);
    std::string truth = "id,group,eta\n";
    for (std::size_t i = 0; i < planted.data.size(); ++i) {
        truth += fmt::format("{},{},{}\n", planted.data[i].id, planted.group[i], planted.eta[i]);
    }
    write_text(common.out / "synth_truth.csv", truth);

    auto config = common_json(common);
    config["preset"] = options.preset;
    config["n"] = options.n;
    config["file"] = options.file;
    Json report = report_header("synth", config, sha256_hex(""));
    report["records"] = planted.data.size();
    report["output_sha256"] = sha256_hex(text);
    report["files"] = {options.file, "synth_truth.csv", "synth_report.json"};
    write_text(common.out / "synth_report.json", dump(report));
    return report;
}

Json cmd_bw_sweep(const BwSweepOptions& options, const CommonOptions& common) {
    const auto loaded = load(options.input);
    const auto& data = loaded.data;
    if (!data.has_routing()) throw InputError("bw-sweep needs routing profiles");
    const auto route = feature_column(data, parse_feature(options.feature));
    const auto eval = feature_column(data, parse_feature(options.eval_feature));
    const auto idx = split_indices(data.size(), {options.split_seed, 0.5});
    const auto cal = calibration_set(data, idx.cal, route);
    const auto test = calibration_set(data, idx.test, route);
    const auto eval_test = pick(eval, idx.test);

    const char* modes[] = {"scott0.5", "scott1", "scott2", "cv-nll", "oracle-ece"};
    Json rows = Json::array();
    std::string csv = "mode,multiplier,ece,worst_tertile_ece,worst_tertile_ci_lo,worst_tertile_ci_hi,nll,diagnostic_only\n";
    for (const char* mode : modes) {
        CalibratorOptions copts;
        copts.bandwidth = parse_bw_mode(mode);
        copts.seed = common.seed;
        const auto fitted = fit_calibrator(Method::ArCondCal, cal, copts, &test);
        ClipStats clip;
        const auto probs = apply_calibrator(fitted, test, &clip);
        const auto metrics = evaluate_metrics(probs, test.labels, std::span<const double>(eval_test));
        const auto boot = bootstrap_metrics(probs, test.labels, eval_test, options.bootstrap, common.seed, common.threads);
        const auto& k = std::get<KernelCalibrator>(fitted.params);
        const auto& wt_ci = boot.ci[8];
        Json row;
        row["mode"] = mode;
        row["multiplier"] = k.bandwidth.multiplier;
        row["ece"] = metrics.ece;
        row["worst_tertile_ece"] = *metrics.worst_tertile_ece;
        row["worst_tertile_ci"] = wt_ci ? Json::array({wt_ci->lo, wt_ci->hi}) : Json(nullptr);
        row["nll"] = metrics.nll;
        row["diagnostic_only"] = k.bandwidth.diagnostic_only;
        row["clip_stats"] = to_json(clip);
        rows.push_back(row);
        csv += fmt::format("{},{},{},{},{},{},{},{}\n", mode, k.bandwidth.multiplier, metrics.ece,
                           *metrics.worst_tertile_ece, wt_ci ? fmt::format("{}", wt_ci->lo) : "",
                           wt_ci ? fmt::format("{}", wt_ci->hi) : "", metrics.nll,
                           k.bandwidth.diagnostic_only ? "true" : "false");
    }
    write_text(common.out / "bw_sweep.csv", csv);

    auto config = common_json(common);
    config["input"] = options.input.string();
    config["feature"] = options.feature;
    config["eval_feature"] = options.eval_feature;
    config["bootstrap"] = options.bootstrap;
    config["split_seed"] = options.split_seed;
    Json report = report_header("bw-sweep", config, loaded.digest);
    report["calibration_size"] = idx.cal.size();
    report["test_size"] = idx.test.size();
    report["rows"] = rows;
    report["files"] = {"bw_sweep.csv", "bw_sweep_report.json"};
    write_text(common.out / "bw_sweep_report.json", dump(report));
    return report;
}

Json cmd_benchmark(const BenchmarkOptions& options, const CommonOptions& common) {
    const auto loaded = load(options.input);
    const auto& data = loaded.data;
    const bool routing = data.has_routing();
    std::vector<double> route;
    std::vector<double> eval;
    if (routing) {
        route = feature_column(data, parse_feature(options.feature));
        eval = feature_column(data, parse_feature(options.eval_feature));
    }
    const auto idx = split_indices(data.size(), {options.split_seed, 0.5});
    const auto cal = calibration_set(data, idx.cal, route);
    const auto test = calibration_set(data, idx.test, route);
    const auto eval_test = pick(eval, idx.test);

    CalibratorOptions copts;
    copts.bandwidth = parse_bw_mode(options.bw_mode);
    copts.seed = common.seed;

    Json rows = Json::array();
    Json notices = Json::array();
    std::string csv = "method";
    for (const char* m : kMetricNames) csv += fmt::format(",{},{}_ci_lo,{}_ci_hi", m, m, m);
    csv += ",delta_acc1\n";
    std::optional<double> base_acc;
    for (const auto method : all_methods()) {
        const auto name = method_name(method);
        if (needs_routing(method) && !routing) {
            notices.push_back(name + " skipped: no routing data");
            continue;
        }
        const auto fitted = fit_calibrator(method, cal, copts, &test);
        ClipStats clip;
        const auto probs = apply_calibrator(fitted, test, &clip);
        const auto metrics = eval_test.empty()
                                 ? evaluate_metrics(probs, test.labels)
                                 : evaluate_metrics(probs, test.labels, std::span<const double>(eval_test));
        const auto boot = bootstrap_metrics(probs, test.labels, eval_test, options.bootstrap, common.seed, common.threads);
        if (method == Method::None) base_acc = metrics.acc1;
        const double delta = metrics.acc1 - *base_acc;

        Json row;
        row["method"] = name;
        row["metrics"] = to_json(metrics);
        row["ci"] = ci_json(boot);
        row["bootstrap_skipped"] = boot.skipped;
        row["delta_acc1"] = delta;
        row["argmax_preserving"] = preserves_argmax(method);
        if (is_kernel(method)) row["clip_stats"] = to_json(clip);
        rows.push_back(row);

        const auto values = metric_vector(metrics);
        csv += name;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const auto& ci = boot.ci[k];
            csv += fmt::format(",{},{},{}", std::isnan(values[k]) ? std::string() : fmt::format("{}", values[k]),
                               ci ? fmt::format("{}", ci->lo) : std::string(),
                               ci ? fmt::format("{}", ci->hi) : std::string());
        }
        csv += fmt::format(",{}\n", delta);
    }
    if (!routing) notices.push_back("worst-tertile ECE skipped: no routing data");
    write_text(common.out / "benchmark.csv", csv);

    auto config = common_json(common);
    config["input"] = options.input.string();
    config["feature"] = options.feature;
    config["eval_feature"] = options.eval_feature;
    config["bootstrap"] = options.bootstrap;
    config["split_seed"] = options.split_seed;
    config["bw_mode"] = options.bw_mode;
    Json report = report_header("benchmark", config, loaded.digest);
    report["calibration_size"] = idx.cal.size();
    report["test_size"] = idx.test.size();
    report["rows"] = rows;
    report["notices"] = notices;
    report["files"] = {"benchmark.csv", "benchmark_report.json"};
    write_text(common.out / "benchmark_report.json", dump(report));
    return report;
}

}  // namespace routecal
