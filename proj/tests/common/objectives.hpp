#pragma once
// Scalar training objectives as functions of the generator parameters, for
// finite-difference checks of the hand-written backward passes.

#include <random>

#include "padapt/model/grad_check.hpp"
#include "padapt/model/models.hpp"
#include "padapt/uda/losses.hpp"

namespace padapt::testing {

struct GradInstance {
    SegNet net;
    Discriminator disc;
    SegImage source;
    LabelMap source_labels;
    SegImage target;
    WeakLabelMap weak;
};

/// A width-2 generator on 16x16 images with random labels. Weak labels mix
/// oracle, pseudo and IGNORE pixels.
inline GradInstance make_grad_instance(std::uint64_t seed, bool aux_head = false) {
    std::mt19937_64 rng(seed * 7919 + 13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, 3), prov(0, 2);
    auto image = [&](const char* id, Domain d) {
        Grid3<double> px(16, 16, 3);
        for (auto& v : px.storage()) v = u(rng);
        return SegImage(id, std::move(px), d);
    };
    SegImage s = image("s", Domain::source), t = image("t", Domain::target);
    LabelMap ls(16, 16), lt(16, 16);
    std::vector<Provenance> pv(256);
    for (std::size_t i = 0; i < 256; ++i) {
        ls.data()[i] = std::uint8_t(cls(rng));
        pv[i] = Provenance(prov(rng));
        lt.data()[i] = pv[i] == Provenance::none ? kIgnore : std::uint8_t(cls(rng));
    }
    return {SegNet(4, 2, seed, aux_head), Discriminator(4, seed + 101, 4), std::move(s), std::move(ls), std::move(t),
            WeakLabelMap(std::move(lt), std::move(pv))};
}

/// Cross-entropy of the generator output against hard labels (mean over non-IGNORE pixels).
inline DifferentiableLoss ce_objective(const SegNet& proto, const SegImage& image, const LabelMap& labels) {
    return [net = proto, x = nn::to_chw(image.pixels()), labels](std::span<const double> p, bool want) mutable {
        std::copy(p.begin(), p.end(), net.params().begin());
        SegNet::Cache cache;
        const auto out = net.forward(x, want ? &cache : nullptr);
        const auto probs = nn::softmax_hwc(out.logits);
        LossAndGrad r;
        Grid3<double> dp;
        r.loss = cross_entropy(probs, labels, want ? &dp : nullptr);
        if (want) {
            r.grad.assign(p.size(), 0.0);
            net.backward(cache, nn::softmax_backward(probs, dp), nullptr, r.grad);
        }
        return r;
    };
}

/// Source segmentation loss.
inline DifferentiableLoss source_seg_objective(const GradInstance& g) {
    return ce_objective(g.net, g.source, g.source_labels);
}

/// Generator side of the adversarial game: -ln D(E(G(x_t))) with D frozen.
inline DifferentiableLoss fool_objective(const SegNet& proto, const Discriminator& disc, const SegImage& target) {
    return [net = proto, disc, x = nn::to_chw(target.pixels())](std::span<const double> p, bool want) mutable {
        std::copy(p.begin(), p.end(), net.params().begin());
        SegNet::Cache cache;
        const auto out = net.forward(x, want ? &cache : nullptr);
        const auto probs = nn::softmax_hwc(out.logits);
        LossAndGrad r;
        Grid3<double> dp;
        r.loss = fool_loss(probs, disc, want ? &dp : nullptr, 1.0);
        if (want) {
            r.grad.assign(p.size(), 0.0);
            net.backward(cache, nn::softmax_backward(probs, dp), nullptr, r.grad);
        }
        return r;
    };
}

/// Stage-2 segmentation loss: source CE plus target CE over weak labels.
inline DifferentiableLoss weak_seg_objective(const GradInstance& g) {
    auto src = ce_objective(g.net, g.source, g.source_labels);
    auto tgt = ce_objective(g.net, g.target, g.weak.classes());
    return [src, tgt](std::span<const double> p, bool want) mutable {
        auto a = src(p, want);
        const auto b = tgt(p, want);
        a.loss += b.loss;
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += b.grad[i];
        return a;
    };
}

/// Stage-2 generator objective on the target: weak CE plus lambda times the fooling term.
inline DifferentiableLoss stage2_target_objective(const GradInstance& g, double lambda) {
    auto tgt = ce_objective(g.net, g.target, g.weak.classes());
    auto fool = fool_objective(g.net, g.disc, g.target);
    return [tgt, fool, lambda](std::span<const double> p, bool want) mutable {
        auto a = tgt(p, want);
        const auto b = fool(p, want);
        a.loss += lambda * b.loss;
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += lambda * b.grad[i];
        return a;
    };
}

}  // namespace padapt::testing
