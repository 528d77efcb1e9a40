#include "olbench/dataset.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <sstream>

#include "olbench/errors.hpp"
#include "olbench/text_io.hpp"

namespace olbench {

std::string_view to_string(InputKind kind) noexcept {
    switch (kind) {
        case InputKind::flat_vector:
            return "flat_vector";
        case InputKind::image_plane:
            return "image_plane";
        case InputKind::precomputed_features:
            return "precomputed_features";
    }
    return "unknown";
}

void log_warning(const std::string& message) { std::clog << "olbench: warning: " << message << '\n'; }

std::vector<std::string> Dataset::labels() const {
    std::vector<std::string> out;
    std::set<std::string_view> seen;
    for (const auto& s : samples) {
        if (seen.insert(s.label).second) out.push_back(s.label);
    }
    return out;
}

Dataset Dataset::filtered(const std::set<std::string>& keep) const {
    Dataset out{id, kind, shape, {}};
    for (const auto& s : samples) {
        if (keep.contains(s.label)) out.samples.push_back(s);
    }
    return out;
}

void Dataset::validate() const {
    const std::size_t expected = shape.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].input.size() != expected) {
            throw ValidationError("dataset " + id + ": sample " + std::to_string(i) + " has " +
                                  std::to_string(samples[i].input.size()) + " values, expected " +
                                  std::to_string(expected));
        }
        if (samples[i].label.empty()) {
            throw ValidationError("dataset " + id + ": sample " + std::to_string(i) + " has an empty label");
        }
    }
}

// ---------------------------------------------------------------------------
// MNIST IDX

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& source) {
    if (offset + 4 > bytes.size()) {
        throw ParseError(source + ": offset " + std::to_string(offset) + ": truncated header");
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t v) {
    std::ostringstream s;
    s << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
    return s.str();
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::string& source) {
    if (got != want) {
        throw ParseError(source + ": offset 0: bad magic number " + hex(got) + ", expected " + hex(want));
    }
}

void check_payload(std::size_t have, std::size_t header, std::size_t need, const std::string& source) {
    if (have < header + need) {
        throw ParseError(source + ": offset " + std::to_string(header) + ": truncated payload, expected " +
                         std::to_string(need) + " bytes, found " + std::to_string(have - header));
    }
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       const std::optional<std::set<std::string>>& keep) {
    const std::string img_src = images.string();
    const std::string lbl_src = labels.string();
    const auto img = read_all(images);
    const auto lbl = read_all(labels);

    check_magic(read_be32(img, 0, img_src), kIdxImagesMagic, img_src);
    check_magic(read_be32(lbl, 0, lbl_src), kIdxLabelsMagic, lbl_src);
    const std::size_t count = read_be32(img, 4, img_src);
    const std::size_t rows = read_be32(img, 8, img_src);
    const std::size_t cols = read_be32(img, 12, img_src);
    const std::size_t label_count = read_be32(lbl, 4, lbl_src);
    if (count != label_count) {
        throw ParseError(lbl_src + ": offset 4: label count " + std::to_string(label_count) +
                         " does not match image count " + std::to_string(count));
    }
    const std::size_t plane = rows * cols;
    check_payload(img.size(), 16, count * plane, img_src);
    check_payload(lbl.size(), 8, count, lbl_src);

    if (keep && keep->empty()) log_warning("MNIST keep-label set is empty; dataset will be empty");

    Dataset ds;
    ds.id = "mnist:" + images.filename().string();
    ds.kind = InputKind::image_plane;
    ds.shape = Shape::image(rows, cols, 1);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned digit = lbl[8 + i];
        if (digit > 9) {
            throw ParseError(lbl_src + ": offset " + std::to_string(8 + i) + ": label " + std::to_string(digit) +
                             " outside 0..9");
        }
        std::string label = std::to_string(digit);
        if (keep && !keep->contains(label)) continue;
        Vec pixels(plane);
        const unsigned char* src = img.data() + 16 + i * plane;
        for (std::size_t p = 0; p < plane; ++p) pixels[p] = static_cast<float>(src[p]) / 255.0f;
        ds.samples.push_back({std::move(pixels), std::move(label)});
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Feature CSV

Dataset read_feature_csv(std::istream& in, const std::string& source, InputKind kind) {
    std::string line;
    std::size_t row_no = 0;
    if (!std::getline(in, line)) throw ParseError(source + ": empty file, expected a header");
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = text::split(line, ',');
    if (header.size() < 2 || header[0] != "label") {
        throw ParseError(source + ":1: header must be 'label,f0,...,f{m-1}'");
    }
    const std::size_t m = header.size() - 1;

    Dataset ds;
    ds.id = "csv:" + std::filesystem::path(source).filename().string();
    ds.kind = kind;
    ds.shape = Shape::flat(m);
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = text::split(line, ',');
        const std::string ctx = source + ":" + std::to_string(row_no);
        if (cells.size() != m + 1) {
            throw ParseError(ctx + ": expected " + std::to_string(m + 1) + " cells, got " +
                             std::to_string(cells.size()));
        }
        if (cells[0].empty()) throw ParseError(ctx + ": empty label");
        Sample s{Vec(m), std::string(cells[0])};
        for (std::size_t j = 0; j < m; ++j) s.input[j] = text::parse_float(cells[j + 1], ctx);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset load_feature_csv(const std::filesystem::path& path, InputKind kind) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open feature CSV " + path.string());
    return read_feature_csv(in, path.string(), kind);
}

void write_feature_csv(std::ostream& out, const Dataset& dataset) {
    const std::size_t m = dataset.shape.size();
    out << "label";
    for (std::size_t j = 0; j < m; ++j) out << ",f" << j;
    out << '\n';
    for (const auto& s : dataset.samples) {
        out << s.label;
        for (float v : s.input) out << ',' << text::format_float(v);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Synthetic clusters

void SyntheticSpec::validate() const {
    if (labels.size() < 2) throw ValidationError("synthetic data needs at least 2 classes");
    if (!(spread > 0.0f)) throw ValidationError("synthetic spread must be > 0");
    if (feature_len == 0) throw ValidationError("synthetic feature length must be >= 1");
    if (means.size() != labels.size()) throw ValidationError("synthetic data needs one mean per class");
    for (const auto& mean : means) {
        if (mean.size() != feature_len) throw ValidationError("synthetic class mean has the wrong length");
    }
}

std::vector<Vec> random_class_means(std::size_t classes, std::size_t feature_len, float scale, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> means(classes, Vec(feature_len));
    for (auto& mean : means) {
        for (auto& v : mean) v = static_cast<float>(scale * rng.normal());
    }
    return means;
}

std::vector<std::string> default_class_labels(std::size_t classes) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < classes; ++i) labels.push_back("c" + std::to_string(i));
    return labels;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Dataset ds;
    ds.id = "synthetic:" + std::to_string(spec.labels.size()) + "x" + std::to_string(spec.samples_per_class) + "-m" +
            std::to_string(spec.feature_len) + "-sd" + text::format_float(spec.spread) + "-s" + std::to_string(spec.seed);
    ds.kind = InputKind::precomputed_features;
    ds.shape = Shape::flat(spec.feature_len);
    ds.samples.reserve(spec.labels.size() * spec.samples_per_class);
    for (std::size_t c = 0; c < spec.labels.size(); ++c) {
        for (std::size_t k = 0; k < spec.samples_per_class; ++k) {
            Sample s{Vec(spec.feature_len), spec.labels[c]};
            for (std::size_t j = 0; j < spec.feature_len; ++j) {
                s.input[j] = spec.means[c][j] + static_cast<float>(spec.spread * rng.normal());
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace olbench
