#include "routecal/binning.hpp"

#include <algorithm>

#include "routecal/errors.hpp"
#include "routecal/record.hpp"
#include "routecal/stats.hpp"

namespace routecal {

std::vector<double> rescale_top(std::span<const double> probs, double confidence) {
    const auto pred = argmax(probs);
    std::vector<double> out(probs.begin(), probs.end());
    const double rest = 1.0 - probs[pred];
    const double target_rest = 1.0 - confidence;
    const double others = static_cast<double>(probs.size() - 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (k == pred) {
            out[k] = confidence;
        } else if (rest > 0.0) {
            out[k] = probs[k] * (target_rest / rest);
        } else {
            out[k] = target_rest / others;
        }
    }
    return out;
}

namespace {

std::vector<Outcome> sorted_by_confidence(std::span<const Outcome> cal) {
    std::vector<Outcome> sorted(cal.begin(), cal.end());
    std::sort(sorted.begin(), sorted.end(), [](const Outcome& a, const Outcome& b) {
        if (a.confidence != b.confidence) return a.confidence < b.confidence;
        return a.correct < b.correct;
    });
    return sorted;
}

}  // namespace

HistogramBinningModel fit_histogram_binning(std::span<const Outcome> cal, std::size_t bin_count) {
    if (cal.empty()) throw InputError("histogram binning: empty calibration set");
    if (bin_count == 0) throw InputError("histogram binning: bin_count must be positive");
    const auto sorted = sorted_by_confidence(cal);
    const std::size_t base = sorted.size() / bin_count;
    const std::size_t extra = sorted.size() % bin_count;
    HistogramBinningModel model;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < bin_count; ++b) {
        const std::size_t size = base + (b < extra ? 1 : 0);
        if (size == 0) continue;
        double hits = 0.0;
        for (std::size_t j = pos; j < pos + size; ++j) hits += sorted[j].correct ? 1.0 : 0.0;
        model.upper.push_back(sorted[pos + size - 1].confidence);
        model.value.push_back(hits / static_cast<double>(size));
        pos += size;
    }
    return model;
}

double histogram_binning_map(const HistogramBinningModel& model, double confidence) {
    const auto it = std::lower_bound(model.upper.begin(), model.upper.end(), confidence);
    if (it == model.upper.end()) return model.value.back();
    return model.value[static_cast<std::size_t>(it - model.upper.begin())];
}

IsotonicModel fit_isotonic(std::span<const Outcome> cal) {
    if (cal.empty()) throw InputError("isotonic regression: empty calibration set");
    const auto sorted = sorted_by_confidence(cal);
    std::vector<double> knots;
    std::vector<double> means;
    std::vector<double> weights;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        double hits = 0.0;
        while (j < sorted.size() && sorted[j].confidence == sorted[i].confidence) {
            hits += sorted[j].correct ? 1.0 : 0.0;
            ++j;
        }
        const double w = static_cast<double>(j - i);
        knots.push_back(sorted[i].confidence);
        means.push_back(hits / w);
        weights.push_back(w);
        i = j;
    }
    IsotonicModel model;
    model.knot = std::move(knots);
    model.value = pava(means, weights);
    return model;
}

double isotonic_map(const IsotonicModel& model, double confidence) {
    const auto it = std::upper_bound(model.knot.begin(), model.knot.end(), confidence);
    if (it == model.knot.begin()) return model.value.front();
    return model.value[static_cast<std::size_t>(it - model.knot.begin()) - 1];
}

}  // namespace routecal
