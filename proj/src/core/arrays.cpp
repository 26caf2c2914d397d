#include "padapt/core/arrays.hpp"

#include <cmath>
#include <sstream>

#include "padapt/core/errors.hpp"

namespace padapt {

template <typename T>
Grid3<T>::Grid3(std::size_t height, std::size_t width, std::size_t channels, std::vector<T> data)
    : h_(height), w_(width), c_(channels), data_(std::move(data)) {
    if (data_.size() != h_ * w_ * c_) {
        throw ShapeError("Grid3: payload size does not match " + std::to_string(h_) + "x" +
                         std::to_string(w_) + "x" + std::to_string(c_));
    }
}

template class Grid3<double>;
template class Grid3<std::uint8_t>;

SegImage::SegImage(std::string id, Grid3<double> pixels, Domain domain)
    : id_(std::move(id)), pixels_(std::move(pixels)), domain_(domain) {
    if (pixels_.channels() != 3) throw ShapeError("SegImage: expected 3 channels");
    if (pixels_.height() < 8 || pixels_.width() < 8) {
        throw InvalidArgument("SegImage '" + id_ + "': image must be at least 8x8");
    }
    for (double v : pixels_.data()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw InvalidArgument("SegImage '" + id_ + "': pixel value outside [0,1]");
        }
    }
}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> data)
    : h_(height), w_(width), data_(std::move(data)) {
    if (data_.size() != h_ * w_) throw ShapeError("LabelMap: payload size mismatch");
}

void LabelMap::validate(std::size_t num_classes) const {
    for (std::size_t y = 0; y < h_; ++y) {
        for (std::size_t x = 0; x < w_; ++x) {
            const auto v = at(y, x);
            if (v != kIgnore && v >= num_classes) {
                std::ostringstream os;
                os << "label " << int(v) << " at (x=" << x << ", y=" << y << ") is >= C=" << num_classes;
                throw InvalidArgument(os.str());
            }
        }
    }
}

std::size_t LabelMap::count_valid() const {
    std::size_t n = 0;
    for (auto v : data_) n += (v != kIgnore);
    return n;
}

ProbMap::ProbMap(Grid3<double> probs) : p_(std::move(probs)) {
    if (p_.channels() < 1) throw ShapeError("ProbMap: zero channels");
    for (std::size_t y = 0; y < p_.height(); ++y) {
        for (std::size_t x = 0; x < p_.width(); ++x) {
            double sum = 0.0;
            for (double v : p_.pixel(y, x)) {
                if (!(v >= 0.0 && v <= 1.0)) {
                    throw InvalidArgument("ProbMap: entry outside [0,1] at (x=" + std::to_string(x) +
                                          ", y=" + std::to_string(y) + ")");
                }
                sum += v;
            }
            if (std::abs(sum - 1.0) > kSumTolerance) {
                throw InvalidArgument("ProbMap: pixel (x=" + std::to_string(x) + ", y=" + std::to_string(y) +
                                      ") does not sum to 1");
            }
        }
    }
}

LabelMap ProbMap::argmax() const {
    LabelMap out(height(), width(), 0);
    for (std::size_t y = 0; y < height(); ++y) {
        for (std::size_t x = 0; x < width(); ++x) {
            auto px = p_.pixel(y, x);
            std::size_t best = 0;
            for (std::size_t k = 1; k < px.size(); ++k) {
                if (px[k] > px[best]) best = k;
            }
            out.at(y, x) = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

EntropyMap::EntropyMap(Grid3<double> values) : e_(std::move(values)) {
    constexpr double kMaxElement = 0.36787944117144233 + 1e-9;  // 1/e
    for (double v : e_.data()) {
        if (!(v >= 0.0 && v <= kMaxElement)) throw InvalidArgument("EntropyMap: entry outside [0, 1/e]");
    }
}

double EntropyMap::pixel_entropy(std::size_t y, std::size_t x) const {
    double s = 0.0;
    for (double v : e_.pixel(y, x)) s += v;
    return s;
}

WeakLabelMap::WeakLabelMap(LabelMap classes, std::vector<Provenance> provenance)
    : classes_(std::move(classes)), prov_(std::move(provenance)) {
    if (prov_.size() != classes_.height() * classes_.width()) {
        throw ShapeError("WeakLabelMap: provenance size mismatch");
    }
    auto cls = classes_.data();
    for (std::size_t i = 0; i < prov_.size(); ++i) {
        const bool none = prov_[i] == Provenance::none;
        if (none != (cls[i] == kIgnore)) {
            throw InvalidArgument("WeakLabelMap: provenance/IGNORE mismatch at index " + std::to_string(i));
        }
    }
}

std::size_t WeakLabelMap::count(Provenance p) const {
    std::size_t n = 0;
    for (auto v : prov_) n += (v == p);
    return n;
}

Grid3<std::uint8_t> one_hot(const LabelMap& labels, std::size_t num_classes) {
    labels.validate(num_classes);
    Grid3<std::uint8_t> out(labels.height(), labels.width(), num_classes, 0);
    for (std::size_t y = 0; y < labels.height(); ++y) {
        for (std::size_t x = 0; x < labels.width(); ++x) {
            const auto v = labels.at(y, x);
            if (v != kIgnore) out.at(y, x, v) = 1;
        }
    }
    return out;
}

}  // namespace padapt
