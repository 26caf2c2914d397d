#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace padapt {

/// SGD with heavy-ball momentum and L2 weight decay (decay added to the gradient).
class SgdMomentum {
public:
    SgdMomentum(std::size_t n, double momentum, double weight_decay)
        : momentum_(momentum), weight_decay_(weight_decay), velocity_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad, double lr);

private:
    double momentum_, weight_decay_;
    std::vector<double> velocity_;
};

class Adam {
public:
    Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.99, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad, double lr);

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

/// base * (1 - iter / max_iter)^power
double poly_lr(double base, long iter, long max_iter, double power = 0.9);

}  // namespace padapt
