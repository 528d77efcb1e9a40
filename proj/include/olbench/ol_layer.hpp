#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "olbench/core_math.hpp"
#include "olbench/frozen_model.hpp"
#include "olbench/strategy_kind.hpp"

namespace olbench {

inline constexpr std::size_t kDefaultMaxClasses = 64;

struct Prediction {
    Vec probabilities;
    Vec logits;
    std::size_t index = 0;
    std::string label;
};

struct ClassSlot {
    std::size_t row = 0;
    bool was_new = false;
};

/// Trainable classification head: an n x m weight matrix, n biases and the
/// label of every row. Rows are ordered by arrival (seed labels first).
class OLLayer {
public:
    /// Bit-exact copy of the seed; the seed's row count becomes known_at_start().
    explicit OLLayer(const HeadSeed& seed, std::size_t max_classes = kDefaultMaxClasses);
    /// Restores a layer whose first `known_at_start` rows came from the original seed.
    OLLayer(const HeadSeed& state, std::size_t max_classes, std::size_t known_at_start);

    /// Returns the row for `label`, appending a zero row and zero bias if it is new.
    /// Throws CapacityError when the layer already holds max_classes() rows.
    ClassSlot ensure_class(std::string_view label);
    /// Row index of `label`, or num_classes() if unknown.
    std::size_t find(std::string_view label) const noexcept;

    Prediction infer(std::span<const float> features) const;

    std::size_t num_classes() const noexcept { return labels_.size(); }
    std::size_t feature_len() const noexcept { return weights_.cols(); }
    std::size_t known_at_start() const noexcept { return known_at_start_; }
    std::size_t max_classes() const noexcept { return max_classes_; }

    const Mat& weights() const noexcept { return weights_; }
    const Vec& biases() const noexcept { return biases_; }
    Mat& weights() noexcept { return weights_; }
    Vec& biases() noexcept { return biases_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    HeadSeed to_seed() const;

    friend bool operator==(const OLLayer&, const OLLayer&) = default;

private:
    Mat weights_;
    Vec biases_;
    std::vector<std::string> labels_;
    std::size_t known_at_start_ = 0;
    std::size_t max_classes_ = kDefaultMaxClasses;
};

/// Softmax prediction of an arbitrary (weights, biases) pair labelled by `labels`.
Prediction predict_with(const Mat& weights, std::span<const float> biases, std::span<const std::string> labels,
                        std::span<const float> features);

/// Analytic footprint in bytes of the OL structures for `kind` with n classes,
/// m features and p classes known at start (4-byte floats and counters).
std::size_t memory_bytes(StrategyKind kind, std::size_t n, std::size_t m, std::size_t p) noexcept;
std::size_t memory_bytes(const OLLayer& layer, StrategyKind kind) noexcept;

}  // namespace olbench
