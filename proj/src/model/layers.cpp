#include "padapt/model/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "padapt/core/errors.hpp"

namespace padapt::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

}  // namespace

Tensor to_chw(const Grid3<double>& g) {
    Tensor t(int(g.channels()), int(g.height()), int(g.width()));
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int k = 0; k < t.c; ++k) t.at(k, y, x) = g.at(y, x, k);
    return t;
}

Grid3<double> to_hwc(const Tensor& t) {
    Grid3<double> g(t.h, t.w, t.c);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int k = 0; k < t.c; ++k) g.at(y, x, k) = t.at(k, y, x);
    return g;
}

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_(in_ch), out_(out_ch), k_(kernel), stride_(stride), pad_(pad) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0) throw InvalidArgument("Conv2d: bad geometry");
}

void Conv2d::init(std::span<double> params, std::mt19937_64& rng, double gain) const {
    const double fan_in = double(in_) * k_ * k_;
    const double bound = gain * std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t nw = std::size_t(out_) * in_ * k_ * k_;
    for (std::size_t i = 0; i < nw; ++i) params[offset_ + i] = u(rng);
    for (int i = 0; i < out_; ++i) params[offset_ + nw + i] = 0.0;
}

namespace {

bool is_pointwise(int k, int stride, int pad) { return k == 1 && stride == 1 && pad == 0; }

void im2col(const Tensor& x, int k, int stride, int pad, int ho, int wo, std::vector<double>& cols) {
    const std::size_t n = std::size_t(ho) * wo;
    cols.assign(std::size_t(x.c) * k * k * n, 0.0);
    for (int c = 0; c < x.c; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols.data() + ((std::size_t(c) * k + ky) * k + kx) * n;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= x.h) continue;
                    const double* src = x.v.data() + (std::size_t(c) * x.h + iy) * x.w;
                    double* dst = row + std::size_t(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < x.w) dst[ox] = src[ix];
                    }
                }
            }
        }
    }
}

void col2im(const std::vector<double>& cols, int k, int stride, int pad, int ho, int wo, Tensor& dx) {
    const std::size_t n = std::size_t(ho) * wo;
    for (int c = 0; c < dx.c; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols.data() + ((std::size_t(c) * k + ky) * k + kx) * n;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= dx.h) continue;
                    double* dst = dx.v.data() + (std::size_t(c) * dx.h + iy) * dx.w;
                    const double* src = row + std::size_t(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < dx.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor Conv2d::forward(std::span<const double> params, const Tensor& x, std::vector<double>* cols) const {
    if (x.c != in_) throw ShapeError("Conv2d: expected " + std::to_string(in_) + " input channels");
    const int ho = out_size(x.h), wo = out_size(x.w);
    const std::size_t n = std::size_t(ho) * wo;
    const int kk = in_ * k_ * k_;
    Tensor y(out_, ho, wo);

    const double* src = x.v.data();
    std::vector<double> local;
    if (!is_pointwise(k_, stride_, pad_)) {
        std::vector<double>& buf = cols ? *cols : local;
        im2col(x, k_, stride_, pad_, ho, wo, buf);
        src = buf.data();
    }
    ConstMapMat wmat(params.data() + offset_, out_, kk);
    ConstMapMat cmat(src, kk, n);
    MapMat ymat(y.v.data(), out_, n);
    ymat.noalias() = wmat * cmat;
    const double* bias = params.data() + offset_ + std::size_t(out_) * kk;
    for (int o = 0; o < out_; ++o) ymat.row(o).array() += bias[o];
    return y;
}

void Conv2d::backward(std::span<const double> params, std::span<double> grad, const Tensor& x,
                      const std::vector<double>& cols, const Tensor& dy, Tensor* dx) const {
    const int ho = dy.h, wo = dy.w;
    const std::size_t n = std::size_t(ho) * wo;
    const int kk = in_ * k_ * k_;
    const bool pointwise = is_pointwise(k_, stride_, pad_);
    const double* src = pointwise ? x.v.data() : cols.data();

    ConstMapMat dymat(dy.v.data(), out_, n);
    ConstMapMat cmat(src, kk, n);
    MapMat gw(grad.data() + offset_, out_, kk);
    gw.noalias() += dymat * cmat.transpose();
    double* gb = grad.data() + offset_ + std::size_t(out_) * kk;
    // Plain loop: Eigen's vectorized sum peels to the row's alignment, which
    // would make the summation order (and the bits) depend on the allocator.
    for (int o = 0; o < out_; ++o) {
        const double* row = dy.v.data() + std::size_t(o) * n;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += row[i];
        gb[o] += s;
    }

    if (!dx) return;
    *dx = Tensor(x.c, x.h, x.w);
    ConstMapMat wmat(params.data() + offset_, out_, kk);
    if (pointwise) {
        MapMat dxm(dx->v.data(), kk, n);
        dxm.noalias() = wmat.transpose() * dymat;
    } else {
        std::vector<double> dcols(std::size_t(kk) * n);
        MapMat dcm(dcols.data(), kk, n);
        dcm.noalias() = wmat.transpose() * dymat;
        col2im(dcols, k_, stride_, pad_, ho, wo, *dx);
    }
}

double sigmoid(double z) noexcept {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void silu_inplace(Tensor& t) {
    for (double& v : t.v) v = v * sigmoid(v);
}

void silu_backward(const Tensor& pre, Tensor& grad) {
    for (std::size_t i = 0; i < grad.v.size(); ++i) {
        const double z = pre.v[i], s = sigmoid(z);
        grad.v[i] *= s * (1.0 + z * (1.0 - s));
    }
}

Tensor upsample2x(const Tensor& x) {
    Tensor y(x.c, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < y.h; ++yy)
            for (int xx = 0; xx < y.w; ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
    return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
    Tensor dx(dy.c, dy.h / 2, dy.w / 2);
    for (int c = 0; c < dy.c; ++c)
        for (int yy = 0; yy < dy.h; ++yy)
            for (int xx = 0; xx < dy.w; ++xx) dx.at(c, yy / 2, xx / 2) += dy.at(c, yy, xx);
    return dx;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.h != b.h || a.w != b.w) throw ShapeError("concat: spatial size mismatch");
    Tensor y(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), y.v.begin());
    std::copy(b.v.begin(), b.v.end(), y.v.begin() + long(a.v.size()));
    return y;
}

void split_grad(const Tensor& d, int channels_a, Tensor& da, Tensor& db) {
    da = Tensor(channels_a, d.h, d.w);
    db = Tensor(d.c - channels_a, d.h, d.w);
    std::copy(d.v.begin(), d.v.begin() + long(da.v.size()), da.v.begin());
    std::copy(d.v.begin() + long(da.v.size()), d.v.end(), db.v.begin());
}

void clamp_logits(Tensor& t) {
    for (double& v : t.v) v = std::clamp(v, -kLogitClamp, kLogitClamp);
}

void clamp_logits_backward(const Tensor& clamped, Tensor& grad) {
    // A clamped value sits exactly on the bound; the raw logit was at or past it.
    for (std::size_t i = 0; i < grad.v.size(); ++i) {
        if (std::abs(clamped.v[i]) >= kLogitClamp) grad.v[i] = 0.0;
    }
}

Grid3<double> softmax_hwc(const Tensor& logits) {
    Grid3<double> p(logits.h, logits.w, logits.c);
    std::vector<double> z(logits.c);
    for (int y = 0; y < logits.h; ++y) {
        for (int x = 0; x < logits.w; ++x) {
            double mx = logits.at(0, y, x);
            for (int k = 1; k < logits.c; ++k) mx = std::max(mx, logits.at(k, y, x));
            double s = 0.0;
            for (int k = 0; k < logits.c; ++k) s += z[k] = std::exp(logits.at(k, y, x) - mx);
            for (int k = 0; k < logits.c; ++k) p.at(y, x, k) = z[k] / s;
        }
    }
    return p;
}

Tensor softmax_backward(const Grid3<double>& probs, const Grid3<double>& dprobs) {
    const int C = int(probs.channels());
    Tensor d(C, int(probs.height()), int(probs.width()));
    for (int y = 0; y < d.h; ++y) {
        for (int x = 0; x < d.w; ++x) {
            auto p = probs.pixel(y, x);
            auto g = dprobs.pixel(y, x);
            double dot = 0.0;
            for (int k = 0; k < C; ++k) dot += p[k] * g[k];
            for (int k = 0; k < C; ++k) d.at(k, y, x) = p[k] * (g[k] - dot);
        }
    }
    return d;
}

}  // namespace padapt::nn
