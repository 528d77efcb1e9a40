#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace olbench {

using Vec = std::vector<float>;

/// Dense row-major float matrix.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    /// Takes ownership of row-major values; throws ShapeError if the size is wrong.
    Mat(std::size_t rows, std::size_t cols, std::vector<float> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<const float> values() const noexcept { return data_; }
    std::span<float> values() noexcept { return data_; }

    /// Appends one row filled with `fill`. Existing rows are untouched.
    void append_row(float fill = 0.0f);
    void set_zero() noexcept;

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// Lowest admissible probability before taking a logarithm.
inline constexpr float kProbabilityFloor = 1e-7f;

/// out[i] = sum_j w(i, j) * x[j] + b[i]. Dot products accumulate in double.
Vec mat_vec_affine(const Mat& w, std::span<const float> x, std::span<const float> b);

/// Max-subtracted softmax.
Vec softmax(std::span<const float> v);

/// -sum_i target[i] * ln(clamp(pred[i], kProbabilityFloor, 1)).
float cross_entropy(std::span<const float> pred, std::span<const float> target);

/// Index of the maximum; ties resolve to the lowest index.
std::size_t argmax(std::span<const float> v);

/// Deterministic pseudorandom source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions below are implemented here rather than taken
/// from <random>, because the standard distributions are not required to
/// produce identical values across library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
    std::uint64_t uniform_below(std::uint64_t bound);
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();
    /// Standard normal via the Box-Muller transform.
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Mixes a tag into a seed (SplitMix64 finaliser) so that independent
/// consumers of one master seed see unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// In-place Fisher-Yates shuffle driven solely by `rng`.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    shuffle(std::span<T>(items), rng);
}

}  // namespace olbench
