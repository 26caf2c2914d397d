#pragma once
// Minimal differentiable building blocks over channel-major (C, H, W) tensors.
// Layers own no parameters; they address a slice of the owning model's flat
// parameter vector, so optimizers and gradient checks see one contiguous array.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "padapt/core/arrays.hpp"

namespace padapt::nn {

struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int channels, int height, int width, double fill = 0.0)
        : c(channels), h(height), w(width), v(std::size_t(channels) * height * width, fill) {}

    std::size_t plane() const noexcept { return std::size_t(h) * w; }
    double& at(int k, int y, int x) { return v[(std::size_t(k) * h + y) * w + x]; }
    double at(int k, int y, int x) const { return v[(std::size_t(k) * h + y) * w + x]; }
};

/// HWC grid -> CHW tensor and back.
Tensor to_chw(const Grid3<double>& g);
Grid3<double> to_hwc(const Tensor& t);

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad);

    std::size_t num_params() const noexcept { return std::size_t(out_) * in_ * k_ * k_ + out_; }
    void bind(std::size_t offset) noexcept { offset_ = offset; }
    std::size_t offset() const noexcept { return offset_; }
    int out_channels() const noexcept { return out_; }

    /// Fan-in scaled uniform weights, zero bias.
    void init(std::span<double> params, std::mt19937_64& rng, double gain = 1.0) const;

    /// `cols` receives the im2col buffer needed by backward (may be null for inference).
    Tensor forward(std::span<const double> params, const Tensor& x, std::vector<double>* cols) const;

    /// Accumulates parameter gradients into `grad`; returns dx when `dx` is non-null.
    void backward(std::span<const double> params, std::span<double> grad, const Tensor& x,
                  const std::vector<double>& cols, const Tensor& dy, Tensor* dx) const;

    int out_size(int in) const noexcept { return (in + 2 * pad_ - k_) / stride_ + 1; }

private:
    int in_ = 0, out_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
    std::size_t offset_ = 0;
};

// SiLU x * sigmoid(x): smooth, so finite-difference checks never straddle a kink.
void silu_inplace(Tensor& t);
/// dy -> dx given the pre-activation input.
void silu_backward(const Tensor& pre, Tensor& grad);

Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& dy);

Tensor concat(const Tensor& a, const Tensor& b);
void split_grad(const Tensor& d, int channels_a, Tensor& da, Tensor& db);

/// Logits are clamped to [-kLogitClamp, kLogitClamp]; gradient is zero outside.
inline constexpr double kLogitClamp = 30.0;
void clamp_logits(Tensor& t);
void clamp_logits_backward(const Tensor& clamped, Tensor& grad);

/// Channel softmax of CHW logits, returned in HWC layout.
Grid3<double> softmax_hwc(const Tensor& logits);
/// Given P (HWC) and dL/dP (HWC), returns dL/dlogits (CHW).
Tensor softmax_backward(const Grid3<double>& probs, const Grid3<double>& dprobs);

double sigmoid(double z) noexcept;
/// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept;

}  // namespace padapt::nn
