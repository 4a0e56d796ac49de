#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "routecal/record.hpp"

namespace routecal {

/// One JSON object per line:
///   {"id": str, "logits": [f64;K], "label": int,
///    "entropy_profile": [f64;L]?, "alpha": [[[f64;N];T_l];L]?}
/// Blank lines are skipped. Errors carry the 1-based line number.
Dataset read_jsonl(std::istream& in);
void write_jsonl(std::ostream& out, const Dataset& data);

/// Header `id,label,logit_0..logit_{K-1},h_0..h_{L-1}`; no alpha.
Dataset read_csv(std::istream& in);
void write_csv(std::ostream& out, const Dataset& data);

/// Dispatches on extension (.csv, otherwise JSONL).
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Calibrated-probability records written by `calibrate`:
///   {"id": str, "label": int, "probs": [f64;K], "entropy_profile": [f64;L]?}
struct ProbabilityRecord {
    std::string id;
    std::size_t label = 0;
    std::vector<double> probs;
    std::vector<double> entropy_profile;
};

std::vector<ProbabilityRecord> read_probability_jsonl(std::istream& in);
void write_probability_jsonl(std::ostream& out, const std::vector<ProbabilityRecord>& records);

std::string read_file(const std::filesystem::path& path);

}  // namespace routecal
