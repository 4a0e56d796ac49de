#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace routecal {

/// Routing weights of one AR sub-layer: `tokens` prior states (rows, T_l)
/// by `positions` token positions (columns, N). Row-major storage.
struct RoutingMatrix {
    std::size_t tokens = 0;
    std::size_t positions = 0;
    std::vector<double> values;

    double at(std::size_t t, std::size_t n) const { return values[t * positions + n]; }
};

struct PredictionRecord {
    std::string id;
    std::vector<double> logits;
    std::size_t label = 0;
    std::optional<std::vector<RoutingMatrix>> alpha;
    std::optional<std::vector<double>> entropy_profile;
};

struct SoftmaxResult {
    std::vector<double> probs;
    std::size_t pred = 0;
    double confidence = 0.0;
};

/// Numerically stable softmax of `logits / temperature`.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

/// Lowest index among maximal entries.
std::size_t argmax(std::span<const double> values);

/// Throws InputError on non-finite logits or K < 2.
SoftmaxResult softmax_confidence(std::span<const double> logits);

/// Checks the record invariants (K >= 2, label < K, finite logits, alpha and
/// profile ranges). Throws InputError.
void validate_record(const PredictionRecord& record);

/// Ordered, validated collection of records sharing K and L. When a record
/// carries raw alpha, its entropy profile is recomputed from it.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<PredictionRecord> records);

    const std::vector<PredictionRecord>& records() const noexcept { return records_; }
    const PredictionRecord& operator[](std::size_t i) const { return records_[i]; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    std::size_t class_count() const noexcept { return class_count_; }
    /// 0 when the records carry no routing data.
    std::size_t layer_count() const noexcept { return layer_count_; }
    bool has_routing() const noexcept { return layer_count_ > 0; }

    /// Records at `indices`, in that order. K and L are preserved even when
    /// the result is empty.
    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::vector<PredictionRecord> records_;
    std::size_t class_count_ = 0;
    std::size_t layer_count_ = 0;
};

}  // namespace routecal
