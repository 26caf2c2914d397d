#pragma once
// Segmentation, entropy and adversarial objectives.
//
// All logs are natural logs with probabilities clamped below by kLogEps.
// Losses are per-pixel (per-location) means, so their scale does not depend
// on resolution.

#include <span>
#include <vector>

#include "padapt/core/arrays.hpp"
#include "padapt/model/layers.hpp"
#include "padapt/model/models.hpp"

namespace padapt {

inline constexpr double kLogEps = 1e-12;

/// Mean cross-entropy over non-IGNORE pixels of P against hard labels Y
/// (0 when every pixel is IGNORE). When `dprobs` is set it receives
/// scale * dLoss/dP in HWC layout (it is overwritten).
double cross_entropy(const Grid3<double>& probs, const LabelMap& labels, Grid3<double>* dprobs = nullptr,
                     double scale = 1.0);

/// As cross_entropy, with a per-pixel weight (row-major, H*W) applied to each
/// counted pixel; still normalized by the non-IGNORE count.
double cross_entropy_weighted(const Grid3<double>& probs, const LabelMap& labels, std::span<const double> weights,
                              Grid3<double>* dprobs = nullptr, double scale = 1.0);

/// Source segmentation loss: -sum Y ln P normalized by the non-IGNORE pixel count.
double seg_loss(const ProbMap& probs, const DenseLabelMap& labels);

/// E = -P ln P elementwise (0 ln 0 := 0 through the clamp).
EntropyMap entropy_map(const ProbMap& probs);
Grid3<double> entropy_values(const Grid3<double>& probs);
/// Chain rule through E = -P ln max(P, eps): returns dLoss/dP given dLoss/dE.
Grid3<double> entropy_backward(const Grid3<double>& probs, const Grid3<double>& dentropy);

/// Which domain the discriminator is trained to call 1.
enum class DomainConvention { source_is_one, target_is_one };

struct AdvLosses {
    double loss_d = 0.0;       // mean over locations of -[ln D(E_s) + ln(1 - D(E_t))]
    double loss_g_fool = 0.0;  // mean over locations of -ln D(E_t)
};

/// From discriminator probabilities at each location.
AdvLosses adv_losses(std::span<const double> d_source, std::span<const double> d_target,
                     DomainConvention convention = DomainConvention::source_is_one);
AdvLosses adv_losses(const EntropyMap& e_source, const EntropyMap& e_target, const Discriminator& d,
                     DomainConvention convention = DomainConvention::source_is_one);

/// Mean over locations of the binary log-loss of sigmoid(logits) against `label_one`.
/// Computed in softplus form; `dlogits` (if set) receives scale * dLoss/dlogits.
double logit_bce(const nn::Tensor& logits, bool label_one, nn::Tensor* dlogits = nullptr, double scale = 1.0);

/// Generator-side fooling term for a target entropy map and its gradient
/// with respect to the probabilities that produced it (scaled by `scale`).
double fool_loss(const Grid3<double>& target_probs, const Discriminator& d, Grid3<double>* dprobs, double scale,
                 DomainConvention convention = DomainConvention::source_is_one);

}  // namespace padapt
