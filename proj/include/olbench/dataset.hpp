#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "olbench/core_math.hpp"
#include "olbench/frozen_model.hpp"

namespace olbench {

enum class InputKind { flat_vector, image_plane, precomputed_features };

std::string_view to_string(InputKind kind) noexcept;

struct Sample {
    Vec input;
    std::string label;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Labelled samples sharing one input shape and kind.
struct Dataset {
    std::string id;
    InputKind kind = InputKind::precomputed_features;
    Shape shape;
    std::vector<Sample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    /// Distinct labels in order of first appearance.
    std::vector<std::string> labels() const;
    /// Keeps only samples whose label is in `keep` (order preserved).
    Dataset filtered(const std::set<std::string>& keep) const;
    /// Throws ValidationError if a sample has the wrong size or an empty label.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// MNIST IDX files (big-endian):
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols unsigned bytes
//   labels: magic 0x00000801, count, then count unsigned bytes
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Loads 28x28x1 image planes scaled to [0, 1]. Labels are the digit strings
/// "0".."9". `keep`, when given, filters by label; an empty set yields an
/// empty dataset and a warning.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       const std::optional<std::set<std::string>>& keep = std::nullopt);

/// Feature CSV: header `label,f0,...,f{m-1}` then one sample per row.
Dataset read_feature_csv(std::istream& in, const std::string& source,
                         InputKind kind = InputKind::precomputed_features);
Dataset load_feature_csv(const std::filesystem::path& path, InputKind kind = InputKind::precomputed_features);
void write_feature_csv(std::ostream& out, const Dataset& dataset);

struct SyntheticSpec {
    std::vector<std::string> labels;  // one per class
    std::size_t feature_len = 0;
    std::vector<Vec> means;  // one per class, each of feature_len values
    float spread = 1.0f;     // isotropic standard deviation
    std::size_t samples_per_class = 0;
    std::uint64_t seed = 0;

    /// Throws ValidationError unless there are >= 2 classes, spread > 0 and means match.
    void validate() const;
};

/// Class means with independent N(0, scale^2) coordinates.
std::vector<Vec> random_class_means(std::size_t classes, std::size_t feature_len, float scale, std::uint64_t seed);

/// Labels "c0", "c1", ...
std::vector<std::string> default_class_labels(std::size_t classes);

/// Gaussian clusters, grouped by class in label order. Deterministic under spec.seed.
Dataset gen_synthetic(const SyntheticSpec& spec);

void log_warning(const std::string& message);

}  // namespace olbench
