#include "olbench/frozen_model.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <istream>
#include <ostream>
#include <set>

#include "olbench/errors.hpp"

namespace olbench {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::string_view padding_name(Padding p) { return p == Padding::valid ? "valid" : "same"; }

// Leading padding for one spatial axis; `same` matches the usual framework
// convention of putting the odd extra cell at the end.
std::size_t leading_pad(Padding p, std::size_t kernel) { return p == Padding::same ? (kernel - 1) / 2 : 0; }

std::size_t conv_out_dim(Padding p, std::size_t in, std::size_t kernel) {
    return p == Padding::same ? in : in - kernel + 1;
}

}  // namespace

std::size_t Shape::size() const noexcept {
    if (dims.empty()) return 0;
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

std::string Shape::str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s + ")";
}

std::string_view layer_kind(const Layer& layer) noexcept {
    return std::visit(overloaded{
                          [](const DenseLayer&) { return std::string_view("dense"); },
                          [](const ReluLayer&) { return std::string_view("relu"); },
                          [](const SoftmaxLayer&) { return std::string_view("softmax"); },
                          [](const Conv2DLayer&) { return std::string_view("conv2d"); },
                          [](const MaxPool2x2Layer&) { return std::string_view("maxpool2x2"); },
                          [](const FlattenLayer&) { return std::string_view("flatten"); },
                          [](const DropoutLayer&) { return std::string_view("dropout"); },
                      },
                      layer);
}

Shape output_shape(const Layer& layer, const Shape& in) {
    return std::visit(
        overloaded{
            [&](const DenseLayer& d) {
                if (!in.is_flat()) throw ShapeError("dense expects a flat input, got " + in.str());
                if (d.weights.cols() != in.dims[0]) {
                    throw ShapeError("dense has " + std::to_string(d.weights.cols()) + " inputs, incoming length is " +
                                     std::to_string(in.dims[0]));
                }
                if (d.bias.size() != d.weights.rows()) throw ShapeError("dense bias length differs from row count");
                return Shape::flat(d.weights.rows());
            },
            [&](const Conv2DLayer& c) {
                if (!in.is_image()) throw ShapeError("conv2d expects an image input, got " + in.str());
                if (c.kernel_h == 0 || c.kernel_w == 0 || c.filters == 0) {
                    throw ShapeError("conv2d kernel dimensions and filter count must be >= 1");
                }
                if (c.in_channels != in.dims[2]) {
                    throw ShapeError("conv2d expects " + std::to_string(c.in_channels) + " channels, got " +
                                     std::to_string(in.dims[2]));
                }
                if (c.kernel.size() != c.filters * c.kernel_h * c.kernel_w * c.in_channels ||
                    c.bias.size() != c.filters) {
                    throw ShapeError("conv2d parameter count does not match its declared dimensions");
                }
                if (c.padding == Padding::valid && (c.kernel_h > in.dims[0] || c.kernel_w > in.dims[1])) {
                    throw ShapeError("conv2d kernel " + std::to_string(c.kernel_h) + "x" + std::to_string(c.kernel_w) +
                                     " larger than input " + in.str());
                }
                return Shape::image(conv_out_dim(c.padding, in.dims[0], c.kernel_h),
                                    conv_out_dim(c.padding, in.dims[1], c.kernel_w), c.filters);
            },
            [&](const MaxPool2x2Layer&) {
                if (!in.is_image()) throw ShapeError("maxpool2x2 expects an image input, got " + in.str());
                if (in.dims[0] < 2 || in.dims[1] < 2) throw ShapeError("maxpool2x2 input too small: " + in.str());
                return Shape::image(in.dims[0] / 2, in.dims[1] / 2, in.dims[2]);
            },
            [&](const FlattenLayer&) { return Shape::flat(in.size()); },
            [&](const SoftmaxLayer&) {
                if (!in.is_flat()) throw ShapeError("softmax expects a flat input, got " + in.str());
                return in;
            },
            [&](const auto&) { return in; },
        },
        layer);
}

std::vector<Shape> validate_chain(const Shape& input, std::span<const Layer> layers) {
    if ((!input.is_flat() && !input.is_image()) || input.size() == 0) {
        throw ValidationError("input shape must be a non-empty flat length or height x width x channels, got " +
                              input.str());
    }
    std::vector<Shape> shapes{input};
    shapes.reserve(layers.size() + 1);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        try {
            shapes.push_back(output_shape(layers[i], shapes.back()));
        } catch (const ShapeError& e) {
            throw ValidationError("layer " + std::to_string(i) + " (" + std::string(layer_kind(layers[i])) +
                                  "): " + e.what());
        }
    }
    return shapes;
}

Vec conv2d_forward(std::span<const float> input, std::size_t height, std::size_t width, const Conv2DLayer& conv) {
    const Shape out_shape = output_shape(conv, Shape::image(height, width, conv.in_channels));
    if (input.size() != height * width * conv.in_channels) {
        throw ShapeError("conv2d input has " + std::to_string(input.size()) + " values, expected " +
                         std::to_string(height * width * conv.in_channels));
    }
    const std::size_t out_h = out_shape.dims[0];
    const std::size_t out_w = out_shape.dims[1];
    const auto pad_y = static_cast<std::ptrdiff_t>(leading_pad(conv.padding, conv.kernel_h));
    const auto pad_x = static_cast<std::ptrdiff_t>(leading_pad(conv.padding, conv.kernel_w));
    const auto h = static_cast<std::ptrdiff_t>(height);
    const auto w = static_cast<std::ptrdiff_t>(width);

    Vec out(out_h * out_w * conv.filters);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            for (std::size_t f = 0; f < conv.filters; ++f) {
                double acc = conv.bias[f];
                for (std::size_t ky = 0; ky < conv.kernel_h; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - pad_y;
                    if (iy < 0 || iy >= h) continue;
                    for (std::size_t kx = 0; kx < conv.kernel_w; ++kx) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - pad_x;
                        if (ix < 0 || ix >= w) continue;
                        const float* px = &input[(static_cast<std::size_t>(iy) * width + static_cast<std::size_t>(ix)) *
                                                 conv.in_channels];
                        for (std::size_t c = 0; c < conv.in_channels; ++c) {
                            acc += static_cast<double>(px[c]) * conv.at(f, ky, kx, c);
                        }
                    }
                }
                out[(oy * out_w + ox) * conv.filters + f] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Vec maxpool2x2_forward(std::span<const float> input, std::size_t height, std::size_t width, std::size_t channels) {
    if (input.size() != height * width * channels) throw ShapeError("maxpool2x2 input size mismatch");
    if (height < 2 || width < 2) throw ShapeError("maxpool2x2 input smaller than the window");
    const std::size_t out_h = height / 2;
    const std::size_t out_w = width / 2;
    Vec out(out_h * out_w * channels);
    auto at = [&](std::size_t y, std::size_t x, std::size_t c) { return input[(y * width + x) * channels + c]; };
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t y = 2 * oy;
                const std::size_t x = 2 * ox;
                out[(oy * out_w + ox) * channels + c] =
                    std::max({at(y, x, c), at(y, x + 1, c), at(y + 1, x, c), at(y + 1, x + 1, c)});
            }
        }
    }
    return out;
}

void HeadSeed::validate() const {
    if (weights.rows() != biases.size() || weights.rows() != labels.size()) {
        throw ValidationError("head: " + std::to_string(weights.rows()) + " weight rows, " +
                              std::to_string(biases.size()) + " biases, " + std::to_string(labels.size()) + " labels");
    }
    std::set<std::string> seen;
    for (const auto& label : labels) {
        if (label.empty()) throw ValidationError("head: empty label");
        if (!seen.insert(label).second) throw ValidationError("head: duplicate label '" + label + "'");
    }
}

FrozenModel::FrozenModel(Shape input, std::vector<Layer> layers, std::map<std::string, std::string> meta)
    : layers_(std::move(layers)), shapes_(validate_chain(input, layers_)), meta_(std::move(meta)) {}

Vec FrozenModel::forward(std::span<const float> input) const {
    if (input.size() != input_shape().size()) {
        throw ShapeError("model expects " + std::to_string(input_shape().size()) + " input values " +
                         input_shape().str() + ", got " + std::to_string(input.size()));
    }
    Vec cur(input.begin(), input.end());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Shape& in = shapes_[i];
        std::visit(overloaded{
                       [&](const DenseLayer& d) { cur = mat_vec_affine(d.weights, cur, d.bias); },
                       [&](const ReluLayer&) {
                           for (auto& v : cur) v = std::max(v, 0.0f);
                       },
                       [&](const SoftmaxLayer&) { cur = softmax(cur); },
                       [&](const Conv2DLayer& c) { cur = conv2d_forward(cur, in.dims[0], in.dims[1], c); },
                       [&](const MaxPool2x2Layer&) { cur = maxpool2x2_forward(cur, in.dims[0], in.dims[1], in.dims[2]); },
                       [&](const FlattenLayer&) {},
                       [&](const DropoutLayer&) {},
                   },
                   layers_[i]);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

Vec read_row(text::LineReader& reader, std::size_t expected, std::string_view what) {
    const std::string line = reader.expect(what);
    const auto tokens = text::split_ws(line);
    const std::string ctx = reader.where() + std::string(what);
    if (tokens.size() != expected) {
        throw ParseError(ctx + ": expected " + std::to_string(expected) + " values, got " +
                         std::to_string(tokens.size()));
    }
    Vec row(expected);
    for (std::size_t i = 0; i < expected; ++i) row[i] = text::parse_float(tokens[i], ctx);
    return row;
}

Mat read_matrix(text::LineReader& reader, std::size_t rows, std::size_t cols, std::string_view what) {
    std::vector<float> values;
    values.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const Vec row = read_row(reader, cols, what);
        values.insert(values.end(), row.begin(), row.end());
    }
    return Mat(rows, cols, std::move(values));
}

void expect_arity(const text::LineReader& reader, std::span<const std::string_view> tokens, std::size_t n) {
    if (tokens.size() != n) {
        throw ParseError(reader.where() + "'" + std::string(tokens[0]) + " " +
                         std::string(tokens.size() > 1 ? tokens[1] : "") + "' expects " + std::to_string(n - 1) +
                         " fields, got " + std::to_string(tokens.size() - 1));
    }
}

Layer read_layer(text::LineReader& reader, std::span<const std::string_view> tok) {
    if (tok.size() < 2) throw ParseError(reader.where() + "layer line without a kind");
    const std::string_view kind = tok[1];
    const std::string ctx = reader.where() + "layer " + std::string(kind);
    if (kind == "dense") {
        expect_arity(reader, tok, 4);
        const auto out = text::parse_count(tok[2], ctx);
        const auto in = text::parse_count(tok[3], ctx);
        DenseLayer d;
        d.weights = read_matrix(reader, out, in, "dense weights");
        d.bias = read_row(reader, out, "dense bias");
        return d;
    }
    if (kind == "conv2d") {
        expect_arity(reader, tok, 7);
        Conv2DLayer c;
        c.filters = text::parse_count(tok[2], ctx);
        c.kernel_h = text::parse_count(tok[3], ctx);
        c.kernel_w = text::parse_count(tok[4], ctx);
        c.in_channels = text::parse_count(tok[5], ctx);
        if (tok[6] == "valid") {
            c.padding = Padding::valid;
        } else if (tok[6] == "same") {
            c.padding = Padding::same;
        } else {
            throw ParseError(ctx + ": padding must be 'valid' or 'same', got '" + std::string(tok[6]) + "'");
        }
        const std::size_t per_filter = c.kernel_h * c.kernel_w * c.in_channels;
        c.kernel.reserve(c.filters * per_filter);
        for (std::size_t f = 0; f < c.filters; ++f) {
            const Vec row = read_row(reader, per_filter, "conv2d filter");
            c.kernel.insert(c.kernel.end(), row.begin(), row.end());
        }
        c.bias = read_row(reader, c.filters, "conv2d bias");
        return c;
    }
    if (kind == "dropout") {
        expect_arity(reader, tok, 3);
        return DropoutLayer{text::parse_float(tok[2], ctx)};
    }
    expect_arity(reader, tok, 2);
    if (kind == "relu") return ReluLayer{};
    if (kind == "softmax") return SoftmaxLayer{};
    if (kind == "flatten") return FlattenLayer{};
    if (kind == "maxpool2x2") return MaxPool2x2Layer{};
    throw ParseError(ctx + ": unknown layer kind");
}

}  // namespace

HeadSeed read_head_body(text::LineReader& reader, std::span<const std::string_view> tok) {
    const std::string ctx = reader.where() + "head";
    if (tok.size() < 3) throw ParseError(ctx + ": expected 'head <n> <m> <label...>'");
    const auto n = text::parse_count(tok[1], ctx);
    const auto m = text::parse_count(tok[2], ctx);
    if (tok.size() != 3 + n) {
        throw ParseError(ctx + ": declares " + std::to_string(n) + " classes but lists " +
                         std::to_string(tok.size() - 3) + " labels");
    }
    HeadSeed head;
    for (std::size_t i = 0; i < n; ++i) head.labels.emplace_back(tok[3 + i]);
    head.weights = read_matrix(reader, n, m, "head weights");
    head.biases = n > 0 ? read_row(reader, n, "head bias") : Vec{};
    head.validate();
    return head;
}

void write_head(std::ostream& out, const HeadSeed& head) {
    out << "head " << head.weights.rows() << ' ' << head.weights.cols();
    for (const auto& label : head.labels) out << ' ' << label;
    out << '\n';
    for (std::size_t r = 0; r < head.weights.rows(); ++r) text::write_row(out, head.weights.row(r));
    if (!head.biases.empty()) text::write_row(out, head.biases);
}

LoadedModel read_model(std::istream& in, const std::string& source) {
    text::LineReader reader(in, source);
    {
        const std::string header = reader.expect("'olmodel v1' header");
        const auto tok = text::split_ws(header);
        if (tok.size() != 2 || tok[0] != "olmodel" || tok[1] != "v1") {
            throw ParseError(reader.where() + "expected header 'olmodel v1'");
        }
    }
    std::map<std::string, std::string> meta;
    std::optional<Shape> input;
    std::vector<Layer> layers;
    std::optional<HeadSeed> head;

    std::string line;
    while (reader.next(line)) {
        const auto tok = text::split_ws(line);
        if (head) throw ParseError(reader.where() + "content after the head block");
        if (tok[0] == "meta") {
            if (tok.size() < 2) throw ParseError(reader.where() + "meta line without a key");
            const auto value_start = line.find(tok[1]) + tok[1].size();
            const auto value_first = line.find_first_not_of(" \t", value_start);
            meta[std::string(tok[1])] = value_first == std::string::npos ? "" : line.substr(value_first);
        } else if (tok[0] == "input") {
            if (input) throw ParseError(reader.where() + "duplicate input line");
            if (tok.size() != 2 && tok.size() != 4) {
                throw ParseError(reader.where() + "input expects <n> or <height> <width> <channels>");
            }
            Shape s;
            for (std::size_t i = 1; i < tok.size(); ++i) s.dims.push_back(text::parse_count(tok[i], reader.where() + "input"));
            input = s;
        } else if (tok[0] == "layer") {
            if (!input) throw ParseError(reader.where() + "layer before the input line");
            layers.push_back(read_layer(reader, tok));
        } else if (tok[0] == "head") {
            head = read_head_body(reader, tok);
        } else {
            throw ParseError(reader.where() + "unknown directive '" + std::string(tok[0]) + "'");
        }
    }
    if (!input) throw ParseError(source + ": missing input line");
    if (!head) throw ParseError(source + ": missing head block");

    if (!layers.empty() && std::holds_alternative<SoftmaxLayer>(layers.back())) {
        throw ValidationError("layer " + std::to_string(layers.size() - 1) +
                              " (softmax): frozen model must be truncated before the classifier");
    }
    FrozenModel model(std::move(*input), std::move(layers), std::move(meta));
    if (head->weights.cols() != model.feature_len()) {
        throw ValidationError("head expects " + std::to_string(head->weights.cols()) +
                              " features but the model produces " + std::to_string(model.feature_len()));
    }
    return LoadedModel{std::move(model), std::move(*head)};
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file " + path.string());
    return read_model(in, path.string());
}

void write_model(std::ostream& out, const FrozenModel& model, const HeadSeed& head) {
    out << "olmodel v1\n";
    for (const auto& [key, value] : model.meta()) out << "meta " << key << ' ' << value << '\n';
    out << "input";
    for (auto d : model.input_shape().dims) out << ' ' << d;
    out << '\n';
    for (const auto& layer : model.layers()) {
        std::visit(overloaded{
                       [&](const DenseLayer& d) {
                           out << "layer dense " << d.weights.rows() << ' ' << d.weights.cols() << '\n';
                           for (std::size_t r = 0; r < d.weights.rows(); ++r) text::write_row(out, d.weights.row(r));
                           text::write_row(out, d.bias);
                       },
                       [&](const Conv2DLayer& c) {
                           out << "layer conv2d " << c.filters << ' ' << c.kernel_h << ' ' << c.kernel_w << ' '
                               << c.in_channels << ' ' << padding_name(c.padding) << '\n';
                           const std::size_t per_filter = c.kernel_h * c.kernel_w * c.in_channels;
                           for (std::size_t f = 0; f < c.filters; ++f) {
                               text::write_row(out, std::span(c.kernel).subspan(f * per_filter, per_filter));
                           }
                           text::write_row(out, c.bias);
                       },
                       [&](const DropoutLayer& d) { out << "layer dropout " << text::format_float(d.rate) << '\n'; },
                       [&](const auto&) { out << "layer " << layer_kind(layer) << '\n'; },
                   },
                   layer);
    }
    write_head(out, head);
}

}  // namespace olbench
