#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "padapt/core/arrays.hpp"
#include "padapt/core/util.hpp"

namespace padapt::testing {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("padapt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

/// Softmax of gaussian logits, so every pixel sums to 1 up to round-off.
inline Grid3<double> random_probs(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                                  double spread = 2.0) {
    std::normal_distribution<double> n(0.0, spread);
    Grid3<double> g(h, w, c);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < c; ++k) s += (g.at(y, x, k) = std::exp(n(rng)));
            for (std::size_t k = 0; k < c; ++k) g.at(y, x, k) /= s;
        }
    }
    return g;
}

inline LabelMap random_labels(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                              double ignore_rate = 0.0) {
    std::uniform_int_distribution<int> cls(0, int(c) - 1);
    std::bernoulli_distribution ign(ignore_rate);
    LabelMap l(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) l.at(y, x) = ign(rng) ? kIgnore : std::uint8_t(cls(rng));
    return l;
}

}  // namespace padapt::testing
