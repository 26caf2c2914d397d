#pragma once
// Value types shared by every stage of the pipeline.
//
// Layout: arrays are H-major (row, column, channel). Point coordinates are
// always (x, y) = (column, row).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace padapt {

inline constexpr std::uint8_t kIgnore = 255;

enum class Domain : std::uint8_t { source = 0, target = 1 };

/// Dense H x W x C grid stored row-major with the channel fastest.
template <typename T>
class Grid3 {
public:
    Grid3() = default;
    Grid3(std::size_t height, std::size_t width, std::size_t channels, T fill = T{})
        : h_(height), w_(width), c_(channels), data_(height * width * channels, fill) {}
    Grid3(std::size_t height, std::size_t width, std::size_t channels, std::vector<T> data);

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t channels() const noexcept { return c_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& at(std::size_t y, std::size_t x, std::size_t k) { return data_[(y * w_ + x) * c_ + k]; }
    const T& at(std::size_t y, std::size_t x, std::size_t k) const {
        return data_[(y * w_ + x) * c_ + k];
    }
    std::span<T> pixel(std::size_t y, std::size_t x) { return {data_.data() + (y * w_ + x) * c_, c_}; }
    std::span<const T> pixel(std::size_t y, std::size_t x) const {
        return {data_.data() + (y * w_ + x) * c_, c_};
    }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }

    bool same_shape(const Grid3& o) const noexcept { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }
    friend bool operator==(const Grid3&, const Grid3&) = default;

private:
    std::size_t h_ = 0, w_ = 0, c_ = 0;
    std::vector<T> data_;
};

/// RGB image with values in [0, 1].
class SegImage {
public:
    SegImage() = default;
    SegImage(std::string id, Grid3<double> pixels, Domain domain);

    const std::string& id() const noexcept { return id_; }
    Domain domain() const noexcept { return domain_; }
    std::size_t height() const noexcept { return pixels_.height(); }
    std::size_t width() const noexcept { return pixels_.width(); }
    const Grid3<double>& pixels() const noexcept { return pixels_; }

    friend bool operator==(const SegImage&, const SegImage&) = default;

private:
    std::string id_;
    Grid3<double> pixels_;
    Domain domain_ = Domain::source;
};

/// Per-pixel class index or kIgnore.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(std::size_t height, std::size_t width, std::uint8_t fill = kIgnore)
        : h_(height), w_(width), data_(height * width, fill) {}
    LabelMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> data);

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::uint8_t& at(std::size_t y, std::size_t x) { return data_[y * w_ + x]; }
    std::uint8_t at(std::size_t y, std::size_t x) const { return data_[y * w_ + x]; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::span<std::uint8_t> data() noexcept { return data_; }

    /// Throws InvalidArgument naming the first pixel whose class is >= num_classes.
    void validate(std::size_t num_classes) const;
    std::size_t count_valid() const;

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    std::size_t h_ = 0, w_ = 0;
    std::vector<std::uint8_t> data_;
};

using DenseLabelMap = LabelMap;

/// Per-pixel class distribution. Validated on construction: entries in
/// [0, 1] and each pixel sums to 1 within 1e-5. Never renormalized.
class ProbMap {
public:
    static constexpr double kSumTolerance = 1e-5;

    ProbMap() = default;
    explicit ProbMap(Grid3<double> probs);

    std::size_t height() const noexcept { return p_.height(); }
    std::size_t width() const noexcept { return p_.width(); }
    std::size_t num_classes() const noexcept { return p_.channels(); }
    double at(std::size_t y, std::size_t x, std::size_t k) const { return p_.at(y, x, k); }
    const Grid3<double>& grid() const noexcept { return p_; }

    /// Hard labels; ties go to the lowest class index.
    LabelMap argmax() const;

    friend bool operator==(const ProbMap&, const ProbMap&) = default;

private:
    Grid3<double> p_;
};

/// Elementwise -p ln p of a ProbMap (nats).
class EntropyMap {
public:
    EntropyMap() = default;
    explicit EntropyMap(Grid3<double> values);

    std::size_t height() const noexcept { return e_.height(); }
    std::size_t width() const noexcept { return e_.width(); }
    std::size_t num_classes() const noexcept { return e_.channels(); }
    double at(std::size_t y, std::size_t x, std::size_t k) const { return e_.at(y, x, k); }
    const Grid3<double>& grid() const noexcept { return e_; }

    /// Channel-summed entropy of one pixel.
    double pixel_entropy(std::size_t y, std::size_t x) const;

    friend bool operator==(const EntropyMap&, const EntropyMap&) = default;

private:
    Grid3<double> e_;
};

enum class Provenance : std::uint8_t { none = 0, oracle = 1, pseudo = 2 };

/// Merged stage-2 target: class + where it came from.
/// Invariant: provenance == none  <=>  class == kIgnore.
class WeakLabelMap {
public:
    WeakLabelMap() = default;
    WeakLabelMap(LabelMap classes, std::vector<Provenance> provenance);

    std::size_t height() const noexcept { return classes_.height(); }
    std::size_t width() const noexcept { return classes_.width(); }
    const LabelMap& classes() const noexcept { return classes_; }
    Provenance provenance(std::size_t y, std::size_t x) const { return prov_[y * classes_.width() + x]; }
    std::span<const Provenance> provenance() const noexcept { return prov_; }
    std::size_t count(Provenance p) const;

    friend bool operator==(const WeakLabelMap&, const WeakLabelMap&) = default;

private:
    LabelMap classes_;
    std::vector<Provenance> prov_;
};

/// IGNORE pixels become all-zero vectors.
Grid3<std::uint8_t> one_hot(const LabelMap& labels, std::size_t num_classes);

}  // namespace padapt
