#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace padapt {

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Evaluates a scalar loss at the given parameter vector, with or without the
/// analytic gradient.
using DifferentiableLoss = std::function<LossAndGrad(std::span<const double> params, bool want_grad)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<std::size_t> coords;      // sampled parameter indices
    std::vector<double> analytic;         // analytic gradient at those indices
    std::vector<double> numeric;          // central differences at those indices
};

/// Relative error |a - n| / max(|a|, |n|, abs_floor). The floor keeps
/// near-zero components from dominating through round-off alone: at
/// eps = 1e-5 a loss of order 1 carries ~1e-10 of finite-difference noise.
inline constexpr double kGradCheckFloor = 1e-5;
double relative_error(double analytic, double numeric, double abs_floor = kGradCheckFloor);

/// Central finite differences on `n_coords` distinct randomly sampled
/// coordinates (all of them if fewer exist). Throws Error on non-finite loss.
GradCheckReport grad_check(const DifferentiableLoss& loss, std::span<const double> params, double eps = 1e-5,
                           std::size_t n_coords = 50, std::uint64_t seed = 0, double abs_floor = kGradCheckFloor);

}  // namespace padapt
