#pragma once
// Segmentation generator and entropy-map discriminator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "padapt/core/arrays.hpp"
#include "padapt/model/layers.hpp"

namespace padapt {

struct LayerCache {
    nn::Tensor in;
    std::vector<double> cols;
    nn::Tensor pre;
};

/// Small U-shaped encoder/decoder: four stride-2 downsampling convolutions,
/// four nearest-upsample + skip-concat decoder convolutions, and a 1x1
/// classifier. Input height and width must be multiples of 16.
class SegNet {
public:
    static constexpr const char* kArchitecture = "toy_segnet";

    struct Output {
        nn::Tensor logits;                 // C x H x W, clamped
        std::optional<nn::Tensor> aux;     // C x H/4 x W/4 when the second head is on
    };

    struct Cache {
        std::array<LayerCache, 9> body;
        LayerCache head, aux_head;
        nn::Tensor logits, aux;
    };

    SegNet(int num_classes, int width, std::uint64_t seed, bool aux_head = false);

    int num_classes() const noexcept { return num_classes_; }
    int width() const noexcept { return width_; }
    std::uint64_t seed() const noexcept { return seed_; }
    bool has_aux_head() const noexcept { return aux_head_; }
    std::size_t num_params() const noexcept { return params_.size(); }
    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }

    Output forward(const nn::Tensor& image, Cache* cache = nullptr) const;
    /// Accumulates dLoss/dparams into grad. `daux` may be null.
    void backward(const Cache& cache, const nn::Tensor& dlogits, const nn::Tensor* daux,
                  std::span<double> grad) const;

    ProbMap predict(const SegImage& image) const;
    LabelMap predict_labels(const SegImage& image) const;

private:
    int num_classes_, width_;
    std::uint64_t seed_;
    bool aux_head_;
    std::array<nn::Conv2d, 9> body_;
    nn::Conv2d head_, aux_;
    std::vector<double> params_;
};

/// Per-location domain classifier over entropy maps: three stride-2
/// convolutions and a 3x3 classifier, giving an (H/8) x (W/8) logit map.
/// Outputs are sigmoid(logit) with logits clamped, so strictly inside (0, 1).
class Discriminator {
public:
    static constexpr const char* kArchitecture = "toy_discriminator";

    struct Cache {
        std::array<LayerCache, 4> layers;
        nn::Tensor logits;
    };

    Discriminator(int num_classes, std::uint64_t seed, int width = 16);

    int num_classes() const noexcept { return num_classes_; }
    int width() const noexcept { return width_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t num_params() const noexcept { return params_.size(); }
    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }

    /// Returns the clamped logit map (1 x H/8 x W/8).
    nn::Tensor forward(const nn::Tensor& entropy, Cache* cache = nullptr) const;
    /// Accumulates parameter gradients (if grad non-empty) and returns dLoss/dinput when dx is set.
    void backward(const Cache& cache, const nn::Tensor& dlogits, std::span<double> grad, nn::Tensor* dx) const;

    /// Probabilities in (0, 1) for an entropy map.
    std::vector<double> probabilities(const EntropyMap& e) const;

    /// Flips the classifier sign so the new output equals 1 - old output.
    void negate_output();

private:
    int num_classes_, width_;
    std::uint64_t seed_;
    std::array<nn::Conv2d, 4> layers_;
    std::vector<double> params_;
};

struct CheckpointInfo {
    std::string architecture;
    int num_classes = 0;
    int width = 0;
    std::uint64_t seed = 0;
    long iteration = 0;
    bool aux_head = false;
};

/// Writes `<stem>.padm` (flat parameters) and `<stem>.json` (manifest).
void save_checkpoint(const std::filesystem::path& stem, const SegNet& net, long iteration);
void save_checkpoint(const std::filesystem::path& stem, const Discriminator& net, long iteration);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& stem);
/// Accepts either the stem or the .padm / .json path.
SegNet load_segnet(const std::filesystem::path& path);
Discriminator load_discriminator(const std::filesystem::path& path);

}  // namespace padapt
