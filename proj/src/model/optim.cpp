#include "padapt/model/optim.hpp"

#include <cmath>

#include "padapt/core/errors.hpp"

namespace padapt {

void SgdMomentum::step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != velocity_.size() || grad.size() != velocity_.size()) {
        throw ShapeError("SgdMomentum: size mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i] + weight_decay_ * params[i];
        velocity_[i] = momentum_ * velocity_[i] + g;
        params[i] -= lr * velocity_[i];
    }
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, double(t_));
    const double c2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1 - beta2_) * grad[i] * grad[i];
        params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

double poly_lr(double base, long iter, long max_iter, double power) {
    if (max_iter <= 0) return base;
    const double frac = 1.0 - double(iter) / double(max_iter);
    return base * std::pow(std::max(frac, 0.0), power);
}

}  // namespace padapt
