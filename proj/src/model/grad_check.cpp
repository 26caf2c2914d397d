#include "padapt/model/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "padapt/core/errors.hpp"

namespace padapt {

double relative_error(double analytic, double numeric, double abs_floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const DifferentiableLoss& loss, std::span<const double> params, double eps,
                           std::size_t n_coords, std::uint64_t seed, double abs_floor) {
    std::vector<double> p(params.begin(), params.end());
    const auto base = loss(p, true);
    if (!std::isfinite(base.loss)) throw Error("grad_check: non-finite loss");
    if (base.grad.size() != p.size()) throw ShapeError("grad_check: gradient size mismatch");

    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n_coords, idx.size()));
    std::sort(idx.begin(), idx.end());

    GradCheckReport r;
    for (std::size_t i : idx) {
        const double orig = p[i];
        p[i] = orig + eps;
        const double fp = loss(p, false).loss;
        p[i] = orig - eps;
        const double fm = loss(p, false).loss;
        p[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) throw Error("grad_check: non-finite loss");
        const double num = (fp - fm) / (2 * eps);
        r.coords.push_back(i);
        r.analytic.push_back(base.grad[i]);
        r.numeric.push_back(num);
        r.max_rel_error = std::max(r.max_rel_error, relative_error(base.grad[i], num, abs_floor));
    }
    return r;
}

}  // namespace padapt
