#include "olbench/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "olbench/errors.hpp"

namespace olbench {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                         std::to_string(data_.size()) + " values");
    }
}

void Mat::append_row(float fill) {
    data_.resize(data_.size() + cols_, fill);
    ++rows_;
}

void Mat::set_zero() noexcept { std::fill(data_.begin(), data_.end(), 0.0f); }

Vec mat_vec_affine(const Mat& w, std::span<const float> x, std::span<const float> b) {
    if (w.cols() != x.size() || w.rows() != b.size()) {
        throw ShapeError("affine: weights " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                         " vs input " + std::to_string(x.size()) + " and bias " + std::to_string(b.size()));
    }
    Vec out(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const auto row = w.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc += static_cast<double>(row[j]) * static_cast<double>(x[j]);
        }
        out[i] = static_cast<float>(acc + static_cast<double>(b[i]));
    }
    return out;
}

Vec softmax(std::span<const float> v) {
    if (v.empty()) throw ShapeError("softmax of an empty vector");
    const float peak = *std::max_element(v.begin(), v.end());
    Vec out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - peak);
        total += out[i];
    }
    for (auto& p : out) p = static_cast<float>(p / total);
    return out;
}

float cross_entropy(std::span<const float> pred, std::span<const float> target) {
    if (pred.size() != target.size()) {
        throw ShapeError("cross_entropy: prediction length " + std::to_string(pred.size()) +
                         " vs target length " + std::to_string(target.size()));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (target[i] == 0.0f) continue;
        const float p = std::clamp(pred[i], kProbabilityFloor, 1.0f);
        loss -= static_cast<double>(target[i]) * std::log(static_cast<double>(p));
    }
    return static_cast<float>(loss);
}

std::size_t argmax(std::span<const float> v) {
    if (v.empty()) throw ShapeError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

std::uint64_t Rng::uniform_below(std::uint64_t bound) {
    // Reject the top partial bucket so every residue is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % bound;
}

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace olbench
