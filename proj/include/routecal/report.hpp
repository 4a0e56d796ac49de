#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "routecal/calibrator.hpp"
#include "routecal/diagnostics.hpp"
#include "routecal/kernel.hpp"
#include "routecal/metrics.hpp"
#include "routecal/probe.hpp"

namespace routecal {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "routecal 0.1.0";

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// version, command, conventions, input digest and the resolved config.
Json report_header(std::string_view command, const Json& config, std::string_view input_digest);

Json to_json(const MetricReport& report);
Json to_json(const ClipStats& stats);
Json to_json(const FittedCalibrator& fitted);
Json to_json(const GapReport& report);
Json to_json(const ProbeFit& fit);

/// bin_lo,bin_hi,n,acc,conf
std::string reliability_csv(std::span<const BinSummary> bins);

/// Deterministic JSON text (two-space indent, trailing newline).
std::string dump(const Json& j);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace routecal
