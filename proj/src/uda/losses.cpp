#include "padapt/uda/losses.hpp"

#include <algorithm>
#include <cmath>

#include "padapt/core/errors.hpp"

namespace padapt {

double cross_entropy(const Grid3<double>& probs, const LabelMap& labels, Grid3<double>* dprobs, double scale) {
    if (probs.height() != labels.height() || probs.width() != labels.width()) {
        throw ShapeError("cross_entropy: prediction and label sizes differ");
    }
    const std::size_t C = probs.channels();
    const std::size_t n = labels.count_valid();
    if (dprobs) *dprobs = Grid3<double>(probs.height(), probs.width(), C, 0.0);
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t y = 0; y < probs.height(); ++y) {
        for (std::size_t x = 0; x < probs.width(); ++x) {
            const auto c = labels.at(y, x);
            if (c == kIgnore) continue;
            if (c >= C) throw InvalidArgument("cross_entropy: label exceeds class count");
            const double p = probs.at(y, x, c);
            sum -= std::log(std::max(p, kLogEps));
            if (dprobs && p >= kLogEps) dprobs->at(y, x, c) = -scale / (p * double(n));
        }
    }
    return sum / double(n);
}

double cross_entropy_weighted(const Grid3<double>& probs, const LabelMap& labels, std::span<const double> weights,
                              Grid3<double>* dprobs, double scale) {
    if (weights.size() != labels.height() * labels.width()) throw ShapeError("cross_entropy_weighted: weight size");
    if (probs.height() != labels.height() || probs.width() != labels.width()) {
        throw ShapeError("cross_entropy_weighted: prediction and label sizes differ");
    }
    const std::size_t C = probs.channels();
    const std::size_t n = labels.count_valid();
    if (dprobs) *dprobs = Grid3<double>(probs.height(), probs.width(), C, 0.0);
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t y = 0; y < probs.height(); ++y) {
        for (std::size_t x = 0; x < probs.width(); ++x) {
            const auto c = labels.at(y, x);
            if (c == kIgnore) continue;
            if (c >= C) throw InvalidArgument("cross_entropy_weighted: label exceeds class count");
            const double w = weights[y * labels.width() + x];
            const double p = probs.at(y, x, c);
            sum -= w * std::log(std::max(p, kLogEps));
            if (dprobs && p >= kLogEps) dprobs->at(y, x, c) = -scale * w / (p * double(n));
        }
    }
    return sum / double(n);
}

double seg_loss(const ProbMap& probs, const DenseLabelMap& labels) { return cross_entropy(probs.grid(), labels); }

Grid3<double> entropy_values(const Grid3<double>& probs) {
    Grid3<double> e(probs.height(), probs.width(), probs.channels());
    auto p = probs.data();
    auto out = e.data();
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = -p[i] * std::log(std::max(p[i], kLogEps));
    return e;
}

EntropyMap entropy_map(const ProbMap& probs) { return EntropyMap(entropy_values(probs.grid())); }

Grid3<double> entropy_backward(const Grid3<double>& probs, const Grid3<double>& dentropy) {
    Grid3<double> d(probs.height(), probs.width(), probs.channels());
    auto p = probs.data();
    auto de = dentropy.data();
    auto out = d.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double dp = p[i] >= kLogEps ? -(std::log(p[i]) + 1.0) : -std::log(kLogEps);
        out[i] = de[i] * dp;
    }
    return d;
}

AdvLosses adv_losses(std::span<const double> d_source, std::span<const double> d_target,
                     DomainConvention convention) {
    if (d_source.empty() || d_target.empty()) throw InvalidArgument("adv_losses: empty discriminator output");
    auto nlog = [](double v) { return -std::log(std::max(v, kLogEps)); };
    const bool src_one = convention == DomainConvention::source_is_one;
    double ls = 0.0, lt = 0.0, fool = 0.0;
    for (double d : d_source) ls += src_one ? nlog(d) : nlog(1.0 - d);
    for (double d : d_target) {
        lt += src_one ? nlog(1.0 - d) : nlog(d);
        fool += src_one ? nlog(d) : nlog(1.0 - d);
    }
    AdvLosses out{ls / double(d_source.size()) + lt / double(d_target.size()), fool / double(d_target.size())};
    if (!std::isfinite(out.loss_d) || !std::isfinite(out.loss_g_fool)) throw Error("adv_losses: non-finite value");
    return out;
}

double logit_bce(const nn::Tensor& logits, bool label_one, nn::Tensor* dlogits, double scale) {
    const double n = double(logits.v.size());
    if (dlogits) *dlogits = nn::Tensor(logits.c, logits.h, logits.w);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        const double z = logits.v[i];
        // -ln sigmoid(z) = softplus(-z); -ln(1 - sigmoid(z)) = softplus(z)
        sum += label_one ? nn::softplus(-z) : nn::softplus(z);
        if (dlogits) dlogits->v[i] = scale * (label_one ? nn::sigmoid(z) - 1.0 : nn::sigmoid(z)) / n;
    }
    return sum / n;
}

AdvLosses adv_losses(const EntropyMap& e_source, const EntropyMap& e_target, const Discriminator& d,
                     DomainConvention convention) {
    const bool src_one = convention == DomainConvention::source_is_one;
    const nn::Tensor ls = d.forward(nn::to_chw(e_source.grid()));
    const nn::Tensor lt = d.forward(nn::to_chw(e_target.grid()));
    AdvLosses out{logit_bce(ls, src_one) + logit_bce(lt, !src_one), logit_bce(lt, src_one)};
    if (!std::isfinite(out.loss_d) || !std::isfinite(out.loss_g_fool)) throw Error("adv_losses: non-finite value");
    return out;
}

double fool_loss(const Grid3<double>& target_probs, const Discriminator& d, Grid3<double>* dprobs, double scale,
                 DomainConvention convention) {
    const Grid3<double> e = entropy_values(target_probs);
    Discriminator::Cache cache;
    const nn::Tensor logits = d.forward(nn::to_chw(e), dprobs ? &cache : nullptr);
    const bool src_one = convention == DomainConvention::source_is_one;
    nn::Tensor dlogits;
    const double loss = logit_bce(logits, src_one, dprobs ? &dlogits : nullptr, scale);
    if (dprobs) {
        nn::Tensor de;
        d.backward(cache, dlogits, {}, &de);
        *dprobs = entropy_backward(target_probs, nn::to_hwc(de));
    }
    return loss;
}

}  // namespace padapt
