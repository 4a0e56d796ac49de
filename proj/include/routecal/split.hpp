#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "routecal/record.hpp"

namespace routecal {

struct SplitSpec {
    std::uint64_t seed = 42;
    double cal_fraction = 0.5;
};

struct SplitIndices {
    std::vector<std::size_t> cal;
    std::vector<std::size_t> test;
};

/// Fisher-Yates shuffle of 0..n-1 on stream (seed, 0), then the first
/// round_half_up(cal_fraction * n) indices form the calibration block.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec);

}  // namespace routecal
