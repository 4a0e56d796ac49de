// routecal command-line interface.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "routecal/commands.hpp"
#include "routecal/errors.hpp"

namespace {

constexpr int kInputFailure = 2;
constexpr int kComputeFailure = 3;

const std::set<std::string> kSubcommands = {"validate", "features", "calibrate", "evaluate", "diagnose",
                                            "probe",    "synth",    "bw-sweep",  "benchmark"};
const std::set<std::string> kGlobalKeys = {"seed", "out", "threads"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Flat key=value config, '#' comments. Keys are flag names without dashes.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw routecal::InputError("cannot open config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw routecal::InputError("config line " + std::to_string(line_no) + ": expected key=value", line_no);
        }
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return entries;
}

// Splices config entries into argv ahead of the user's own flags; every
// option keeps its last value, so command-line flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;
    const auto entries = read_config(config_path);
    const auto sub = std::find_if(args.begin() + 1, args.end(), [](const std::string& a) { return kSubcommands.count(a) > 0; });
    std::vector<std::string> global;
    std::vector<std::string> local;
    for (const auto& [key, value] : entries) {
        (kGlobalKeys.count(key) ? global : local).push_back("--" + key + "=" + value);
    }
    std::vector<std::string> out{args[0]};
    out.insert(out.end(), global.begin(), global.end());
    out.insert(out.end(), args.begin() + 1, sub);
    if (sub != args.end()) {
        out.push_back(*sub);
        out.insert(out.end(), local.begin(), local.end());
        out.insert(out.end(), sub + 1, args.end());
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace routecal;
    CLI::App app{"Routing-conditional calibration diagnostics"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    CommonOptions common;
    common.threads = 0;
    std::string config_path;
    app.add_option("--seed", common.seed, "Root seed for every stochastic step")->capture_default_str();
    app.add_option("--out", common.out, "Output directory")->capture_default_str();
    app.add_option("--threads", common.threads, "Worker threads (0 = all cores); never changes results");
    app.add_option("--config", config_path, "Flat key=value file; command-line flags override it");

    ValidateOptions validate;
    auto* v = app.add_subcommand("validate", "Check a record file against the data invariants");
    v->add_option("input", validate.input, "JSONL or CSV records")->required();

    FeaturesOptions features;
    auto* f = app.add_subcommand("features", "Write scalar routing features per record");
    f->add_option("--input,input", features.input, "JSONL or CSV records")->required();

    CalibrateOptions calibrate;
    auto* c = app.add_subcommand("calibrate", "Fit a calibrator on the calibration half, apply to the test half");
    c->add_option("--input,input", calibrate.input)->required();
    c->add_option("--method", calibrate.method, "ts|vs|cts|hb|iso|lc|rcmmc|nw-conf|nw-predent|ar-condcal|none")
        ->capture_default_str();
    c->add_option("--bw-mode", calibrate.bw_mode, "scott|scott0.5|scott2|cv-nll|oracle-ece")->capture_default_str();
    c->add_option("--feature", calibrate.feature, "Routing feature of ar-condcal")->capture_default_str();
    c->add_option("--cal-fraction", calibrate.cal_fraction)->capture_default_str();
    c->add_option("--split-seed", calibrate.split_seed)->capture_default_str();

    EvaluateOptions evaluate;
    auto* e = app.add_subcommand("evaluate", "Calibration metrics and reliability tables");
    e->add_option("--input", evaluate.input, "Raw records (softmax of logits is evaluated)");
    e->add_option("--probs", evaluate.probs, "Calibrated-probability JSONL from calibrate");
    e->add_option("--feature", evaluate.feature, "Worst-tertile feature")->capture_default_str();
    e->add_option("--bins", evaluate.bins)->capture_default_str();

    DiagnoseOptions diagnose;
    auto* d = app.add_subcommand("diagnose", "Matched-confidence gap protocol");
    d->add_option("--input,input", diagnose.input)->required();
    d->add_option("--feature", diagnose.feature)->capture_default_str();
    d->add_option("--bins", diagnose.bins)->capture_default_str();
    d->add_option("--min-support", diagnose.min_support)->capture_default_str();
    d->add_option("--bootstrap", diagnose.bootstrap)->capture_default_str();
    d->add_option("--perm", diagnose.permutations)->capture_default_str();

    ProbeOptions probe;
    auto* p = app.add_subcommand("probe", "Capacity-matched probe audit");
    p->add_option("--input,input", probe.input)->required();
    p->add_option("--hidden", probe.probe.hidden_width)->capture_default_str();
    p->add_option("--epochs", probe.probe.epochs)->capture_default_str();
    p->add_option("--lr", probe.probe.learning_rate)->capture_default_str();
    p->add_option("--weight-decay", probe.probe.weight_decay)->capture_default_str();
    p->add_option("--split-seed", probe.probe.split_seed)->capture_default_str();
    p->add_option("--ridge-lambda", probe.probe.ridge_lambda)->capture_default_str();

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "Write a planted synthetic substrate");
    s->add_option("--preset", synth.preset, "null|planted-gap|tertile-ece|routing-signal")->capture_default_str();
    s->add_option("--n", synth.n)->capture_default_str();
    s->add_option("--file", synth.file)->capture_default_str();

    BwSweepOptions sweep;
    auto* w = app.add_subcommand("bw-sweep", "AR-CondCal under the five bandwidth modes");
    w->add_option("--input,input", sweep.input)->required();
    w->add_option("--feature", sweep.feature)->capture_default_str();
    w->add_option("--eval-feature", sweep.eval_feature)->capture_default_str();
    w->add_option("--bootstrap", sweep.bootstrap)->capture_default_str();
    w->add_option("--split-seed", sweep.split_seed)->capture_default_str();

    BenchmarkOptions bench;
    auto* b = app.add_subcommand("benchmark", "Every calibrator on one dataset with bootstrap CIs");
    b->add_option("--input,input", bench.input)->required();
    b->add_option("--feature", bench.feature)->capture_default_str();
    b->add_option("--eval-feature", bench.eval_feature)->capture_default_str();
    b->add_option("--bootstrap", bench.bootstrap)->capture_default_str();
    b->add_option("--split-seed", bench.split_seed)->capture_default_str();
    b->add_option("--bw-mode", bench.bw_mode)->capture_default_str();

    try {
        auto args = expand_config(argc, argv);
        args.erase(args.begin());
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kInputFailure;
    } catch (const InputError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kInputFailure;
    }
    if (common.threads == 0) common.threads = std::max(1u, std::thread::hardware_concurrency());

    try {
        Json report;
        if (*v) {
            report = cmd_validate(validate, common);
            std::cout << "valid: " << report["records"].get<std::size_t>() << " records, K = "
                      << report["classes"].get<std::size_t>() << ", L = " << report["layers"].get<std::size_t>()
                      << '\n';
            return 0;
        }
        if (*f) report = cmd_features(features, common);
        if (*c) report = cmd_calibrate(calibrate, common);
        if (*e) report = cmd_evaluate(evaluate, common);
        if (*d) report = cmd_diagnose(diagnose, common);
        if (*p) report = cmd_probe(probe, common);
        if (*s) report = cmd_synth(synth, common);
        if (*w) report = cmd_bw_sweep(sweep, common);
        if (*b) report = cmd_benchmark(bench, common);
        std::cout << "wrote";
        for (const auto& file : report["files"]) std::cout << ' ' << (common.out / file.get<std::string>()).string();
        std::cout << '\n';
    } catch (const InputError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kInputFailure;
    } catch (const ComputeError& err) {
        std::cerr << "computation failed: " << err.what() << '\n';
        return kComputeFailure;
    } catch (const std::exception& err) {
        std::cerr << "computation failed: " << err.what() << '\n';
        return kComputeFailure;
    }
    return 0;
}
