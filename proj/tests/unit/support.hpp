#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "olbench/core_math.hpp"
#include "olbench/frozen_model.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("olbench-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline olbench::Vec random_vec(olbench::Rng& rng, std::size_t n, double scale = 1.0) {
    olbench::Vec v(n);
    for (auto& x : v) x = static_cast<float>(scale * rng.normal());
    return v;
}

inline olbench::Mat random_mat(olbench::Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    return olbench::Mat(rows, cols, random_vec(rng, rows * cols, scale));
}

inline olbench::HeadSeed random_head(olbench::Rng& rng, std::size_t n, std::size_t m, const std::string& prefix = "k",
                                     double scale = 0.5) {
    olbench::HeadSeed h{random_mat(rng, n, m, scale), random_vec(rng, n, scale), {}};
    for (std::size_t i = 0; i < n; ++i) h.labels.push_back(prefix + std::to_string(i));
    return h;
}

inline olbench::Vec one_hot(std::size_t n, std::size_t hot) {
    olbench::Vec t(n, 0.0f);
    t[hot] = 1.0f;
    return t;
}

}  // namespace testing
