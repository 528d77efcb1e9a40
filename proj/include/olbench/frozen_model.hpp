#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "olbench/core_math.hpp"
#include "olbench/text_io.hpp"

namespace olbench {

/// Either a flat length {n} or an image shape {height, width, channels}.
struct Shape {
    std::vector<std::size_t> dims;

    static Shape flat(std::size_t n) { return Shape{{n}}; }
    static Shape image(std::size_t h, std::size_t w, std::size_t c) { return Shape{{h, w, c}}; }

    bool is_flat() const noexcept { return dims.size() == 1; }
    bool is_image() const noexcept { return dims.size() == 3; }
    std::size_t size() const noexcept;
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

enum class Padding { valid, same };

struct DenseLayer {
    Mat weights;  // out x in
    Vec bias;     // out
};

/// Cross-correlation (no kernel flip) over HWC tensors.
struct Conv2DLayer {
    std::size_t filters = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t in_channels = 0;
    Padding padding = Padding::valid;
    std::vector<float> kernel;  // [filter][ky][kx][channel]
    Vec bias;                   // filters

    float at(std::size_t f, std::size_t ky, std::size_t kx, std::size_t c) const noexcept {
        return kernel[((f * kernel_h + ky) * kernel_w + kx) * in_channels + c];
    }
};

struct ReluLayer {};
struct SoftmaxLayer {};
/// 2x2 window, stride 2; odd trailing rows/columns are dropped.
struct MaxPool2x2Layer {};
struct FlattenLayer {};
/// Identity at inference; the rate is kept only for round-tripping files.
struct DropoutLayer {
    float rate = 0.0f;
};

using Layer = std::variant<DenseLayer, ReluLayer, SoftmaxLayer, Conv2DLayer, MaxPool2x2Layer, FlattenLayer,
                           DropoutLayer>;

std::string_view layer_kind(const Layer& layer) noexcept;

/// Output shape of one layer applied to `in`; throws ShapeError when incompatible.
Shape output_shape(const Layer& layer, const Shape& in);

/// Symbolic shapes after every layer (front() is the input shape).
/// Throws ValidationError naming the offending layer index.
std::vector<Shape> validate_chain(const Shape& input, std::span<const Layer> layers);

/// Valid or same-padded convolution over an HWC tensor of shape (h, w, in_channels).
/// Same padding puts the extra row/column of an even kernel at the bottom/right.
Vec conv2d_forward(std::span<const float> input, std::size_t height, std::size_t width,
                   const Conv2DLayer& conv);

Vec maxpool2x2_forward(std::span<const float> input, std::size_t height, std::size_t width,
                       std::size_t channels);

/// Final classification layer exported alongside the truncated model.
struct HeadSeed {
    Mat weights;  // n x m
    Vec biases;   // n
    std::vector<std::string> labels;

    /// Throws ValidationError on inconsistent row counts or duplicate labels.
    void validate() const;

    friend bool operator==(const HeadSeed&, const HeadSeed&) = default;
};

/// Inference-only feature extractor. Immutable after construction.
class FrozenModel {
public:
    /// Validates the shape chain; an empty layer list is the identity extractor.
    FrozenModel(Shape input, std::vector<Layer> layers, std::map<std::string, std::string> meta = {});

    Vec forward(std::span<const float> input) const;

    const Shape& input_shape() const noexcept { return shapes_.front(); }
    std::size_t feature_len() const noexcept { return shapes_.back().size(); }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    /// shapes()[i] is the input of layer i; shapes().back() is the feature shape.
    const std::vector<Shape>& shapes() const noexcept { return shapes_; }
    /// Free-form `meta` lines (padding notes, input normalisation, provenance).
    const std::map<std::string, std::string>& meta() const noexcept { return meta_; }

private:
    std::vector<Layer> layers_;
    std::vector<Shape> shapes_;
    std::map<std::string, std::string> meta_;
};

struct LoadedModel {
    FrozenModel model;
    HeadSeed head;
};

/// Model text format:
///
///     olmodel v1
///     meta <key> <value...>                 (optional, repeatable)
///     input <n> | input <h> <w> <c>
///     layer dense <out> <in>                followed by <out> weight rows and one bias row
///     layer conv2d <filters> <kh> <kw> <in_channels> <valid|same>
///                                           followed by <filters> rows of kh*kw*in_channels
///                                           values ordered (ky, kx, channel), then one bias row
///     layer relu | softmax | flatten | maxpool2x2
///     layer dropout <rate>
///     head <n> <m> <label...>               followed by <n> weight rows and one bias row
///
/// Blank lines and lines starting with `#` are ignored. Labels may not contain whitespace.
LoadedModel read_model(std::istream& in, const std::string& source = "<model>");
LoadedModel load_model(const std::filesystem::path& path);
void write_model(std::ostream& out, const FrozenModel& model, const HeadSeed& head);

void write_head(std::ostream& out, const HeadSeed& head);
/// Parses a head block whose `head` line has already been consumed by `reader`.
HeadSeed read_head_body(text::LineReader& reader, std::span<const std::string_view> head_tokens);

}  // namespace olbench
