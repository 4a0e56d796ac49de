#include "routecal/record.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "routecal/errors.hpp"
#include "routecal/features.hpp"

namespace routecal {

std::vector<double> softmax(std::span<const double> logits, double temperature) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    double top = logits[0] / temperature;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = logits[k] / temperature;
        top = std::max(top, out[k]);
    }
    double total = 0.0;
    for (auto& v : out) {
        v = std::exp(v - top);
        total += v;
    }
    for (auto& v : out) v /= total;
    return out;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) best = k;
    }
    return best;
}

SoftmaxResult softmax_confidence(std::span<const double> logits) {
    if (logits.size() < 2) throw InputError("softmax_confidence: need at least 2 classes");
    for (double z : logits) {
        if (!std::isfinite(z)) throw InputError("softmax_confidence: non-finite logit");
    }
    SoftmaxResult result;
    result.probs = softmax(logits);
    result.pred = argmax(result.probs);
    result.confidence = result.probs[result.pred];
    return result;
}

void validate_record(const PredictionRecord& record) {
    const auto& id = record.id;
    if (record.logits.size() < 2) throw InputError(fmt::format("record '{}': K < 2", id));
    if (record.label >= record.logits.size()) {
        throw InputError(fmt::format("record '{}': label {} outside [0, {})", id, record.label,
                                     record.logits.size()));
    }
    for (double z : record.logits) {
        if (!std::isfinite(z)) throw InputError(fmt::format("record '{}': non-finite logit", id));
    }
    if (record.alpha) {
        if (record.alpha->empty()) throw InputError(fmt::format("record '{}': empty alpha", id));
        for (std::size_t l = 0; l < record.alpha->size(); ++l) {
            try {
                check_routing_matrix((*record.alpha)[l]);
            } catch (const InputError& e) {
                throw InputError(fmt::format("record '{}': alpha layer {}: {}", id, l, e.what()));
            }
        }
    }
    if (record.entropy_profile) {
        if (record.entropy_profile->empty()) throw InputError(fmt::format("record '{}': empty entropy profile", id));
        for (double h : *record.entropy_profile) {
            if (!(h >= 0.0 && h <= 1.0)) {
                throw InputError(fmt::format("record '{}': entropy profile entry {} outside [0,1]", id, h));
            }
        }
    }
}

Dataset::Dataset(std::vector<PredictionRecord> records) : records_(std::move(records)) {
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        auto& rec = records_[i];
        validate_record(rec);
        if (rec.alpha) rec.entropy_profile = entropy_profile(*rec.alpha);
        if (!ids.insert(rec.id).second) throw InputError(fmt::format("duplicate id '{}'", rec.id));

        const std::size_t k = rec.logits.size();
        const std::size_t l = rec.entropy_profile ? rec.entropy_profile->size() : 0;
        if (i == 0) {
            class_count_ = k;
            layer_count_ = l;
        } else if (k != class_count_) {
            throw InputError(fmt::format("record '{}': K={} differs from dataset K={}", rec.id, k, class_count_));
        } else if (l != layer_count_) {
            throw InputError(fmt::format("record '{}': L={} differs from dataset L={}", rec.id, l, layer_count_));
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.class_count_ = class_count_;
    out.layer_count_ = layer_count_;
    out.records_.reserve(indices.size());
    for (auto i : indices) out.records_.push_back(records_.at(i));
    return out;
}

}  // namespace routecal
