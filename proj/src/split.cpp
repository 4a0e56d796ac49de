#include "routecal/split.hpp"

#include <cmath>
#include <numeric>

#include "routecal/errors.hpp"
#include "routecal/rng.hpp"

namespace routecal {

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    if (!(spec.cal_fraction > 0.0 && spec.cal_fraction < 1.0)) {
        throw InputError("cal_fraction must lie in (0, 1)");
    }
    if (n == 0) throw InputError("cannot split an empty dataset");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = derive_stream(spec.seed, streams::kSplit);
    rng.shuffle(std::span<std::size_t>(order));

    const auto n_cal = static_cast<std::size_t>(std::floor(spec.cal_fraction * static_cast<double>(n) + 0.5));
    SplitIndices out;
    out.cal.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_cal));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_cal), order.end());
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec) {
    const auto idx = split_indices(data.size(), spec);
    return {data.subset(idx.cal), data.subset(idx.test)};
}

}  // namespace routecal
