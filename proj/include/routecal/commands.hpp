#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "routecal/report.hpp"

namespace routecal {

/// Flags shared by every subcommand. `threads` never changes any output, so
/// it is left out of the echoed config.
struct CommonOptions {
    std::uint64_t seed = 42;
    std::filesystem::path out = ".";
    unsigned threads = 1;
};

struct ValidateOptions {
    std::filesystem::path input;
};

struct FeaturesOptions {
    std::filesystem::path input;
};

struct CalibrateOptions {
    std::filesystem::path input;
    std::string method = "ts";
    std::string bw_mode = "scott";
    /// Routing feature of ar-condcal.
    std::string feature = "mm_r_std";
    double cal_fraction = 0.5;
    std::uint64_t split_seed = 42;
};

struct EvaluateOptions {
    /// Exactly one of input (raw logits) and probs (calibrate output).
    std::filesystem::path input;
    std::filesystem::path probs;
    /// Worst-tertile feature; ignored when no routing data is present.
    std::string feature = "r_std";
    std::size_t bins = 15;
};

struct DiagnoseOptions {
    std::filesystem::path input;
    std::string feature = "r_agg";
    std::size_t bins = 15;
    std::size_t min_support = 5;
    std::size_t bootstrap = 5000;
    std::size_t permutations = 5000;
};

struct ProbeOptions {
    std::filesystem::path input;
    ProbeConfig probe;
};

struct SynthOptions {
    std::string preset = "null";
    std::size_t n = 10000;
    /// Output file name inside the output directory.
    std::string file = "synth.jsonl";
};

struct BwSweepOptions {
    std::filesystem::path input;
    std::string feature = "mm_r_std";
    /// Worst-tertile feature.
    std::string eval_feature = "r_std";
    std::size_t bootstrap = 500;
    std::uint64_t split_seed = 42;
};

struct BenchmarkOptions {
    std::filesystem::path input;
    std::string feature = "mm_r_std";
    std::string eval_feature = "r_std";
    std::size_t bootstrap = 500;
    std::uint64_t split_seed = 42;
    std::string bw_mode = "scott";
};

/// bandwidth-mode names: scott, scott0.5, scott1, scott2, cv-nll, oracle-ece.
KernelSpec parse_bw_mode(const std::string& name);

/// Each command writes its files under common.out and returns the main
/// report (also written as <command>_report.json, except validate).
Json cmd_validate(const ValidateOptions& options, const CommonOptions& common);
Json cmd_features(const FeaturesOptions& options, const CommonOptions& common);
Json cmd_calibrate(const CalibrateOptions& options, const CommonOptions& common);
Json cmd_evaluate(const EvaluateOptions& options, const CommonOptions& common);
Json cmd_diagnose(const DiagnoseOptions& options, const CommonOptions& common);
Json cmd_probe(const ProbeOptions& options, const CommonOptions& common);
Json cmd_synth(const SynthOptions& options, const CommonOptions& common);
Json cmd_bw_sweep(const BwSweepOptions& options, const CommonOptions& common);
Json cmd_benchmark(const BenchmarkOptions& options, const CommonOptions& common);

}  // namespace routecal
