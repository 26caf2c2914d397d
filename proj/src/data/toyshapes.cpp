#include "padapt/data/toyshapes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "padapt/core/errors.hpp"
#include "padapt/core/util.hpp"

namespace padapt {

const std::vector<std::string>& toyshapes_class_names() {
    static const std::vector<std::string> names{"background", "circle", "triangle", "rectangle"};
    return names;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double d = mx - mn;
    double h = 0.0;
    if (d > 0) {
        if (mx == r) h = std::fmod((g - b) / d, 6.0);
        else if (mx == g) h = (b - r) / d + 2.0;
        else h = (r - g) / d + 4.0;
        h /= 6.0;
        if (h < 0) h += 1.0;
    }
    return {h, mx > 0 ? d / mx : 0.0, mx};
}

double quantize(double v) { return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Shape {
    std::uint8_t cls;
    double cx, cy, r, angle, aspect;

    bool contains(double px, double py) const {
        const double dx = px - cx, dy = py - cy;
        switch (cls) {
            case 1: return dx * dx + dy * dy <= r * r;
            case 2: {
                std::array<std::array<double, 2>, 3> v;
                for (int k = 0; k < 3; ++k) {
                    const double a = angle + k * 2.0 * std::numbers::pi / 3.0;
                    v[k] = {cx + r * std::cos(a), cy + r * std::sin(a)};
                }
                auto side = [&](int i, int j) {
                    return (v[j][0] - v[i][0]) * (py - v[i][1]) - (v[j][1] - v[i][1]) * (px - v[i][0]);
                };
                const double s0 = side(0, 1), s1 = side(1, 2), s2 = side(2, 0);
                return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
            }
            default: {
                const double c = std::cos(angle), s = std::sin(angle);
                const double u = c * dx + s * dy, w = -s * dx + c * dy;
                return std::abs(u) <= r * 0.85 && std::abs(w) <= r * 0.85 * aspect;
            }
        }
    }
};

constexpr std::array<double, 4> kClassHue{0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0};

}  // namespace

std::uint64_t scene_seed(std::uint64_t seed, const std::string& split, std::size_t index) {
    return derive_seed(seed, {"toyshapes", split, std::to_string(index)});
}

Scene render_scene(std::uint64_t seed, std::size_t height, std::size_t width) {
    if (height < 32 || width < 32) throw InvalidArgument("render_scene: image must be at least 32x32 to place shapes");
    Rng rng(seed);
    const double H = double(height), W = double(width), side = std::min(H, W);

    // Background: desaturated color with a linear ramp.
    const auto base = hsv_to_rgb(uniform(rng, 0, 1), uniform(rng, 0.0, 0.25), uniform(rng, 0.35, 0.75));
    const double gx = uniform(rng, -0.1, 0.1), gy = uniform(rng, -0.1, 0.1);

    Scene scene{Grid3<double>(height, width, 3), LabelMap(height, width, 0)};
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double ramp = gx * (x / W - 0.5) + gy * (y / H - 0.5);
            for (int k = 0; k < 3; ++k) scene.pixels.at(y, x, k) = base[k] + ramp;
        }
    }

    const int n_shapes = 1 + int(rng() % 3);
    std::vector<std::uint8_t> occupied(height * width, 0);  // shape pixels dilated by 1
    int placed = 0;
    for (int s = 0; s < n_shapes; ++s) {
        const auto cls = static_cast<std::uint8_t>(1 + rng() % 3);
        const auto color = hsv_to_rgb(kClassHue[cls] + uniform(rng, -0.1, 0.1), uniform(rng, 0.55, 1.0),
                                      uniform(rng, 0.55, 1.0));
        bool ok = false;
        for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
            Shape shp{cls, 0, 0, uniform(rng, 0.12, 0.24) * side, uniform(rng, 0, 2 * std::numbers::pi),
                      uniform(rng, 0.5, 1.0)};
            shp.cx = uniform(rng, shp.r + 1, W - shp.r - 1);
            shp.cy = uniform(rng, shp.r + 1, H - shp.r - 1);
            const auto x0 = std::size_t(std::max(0.0, shp.cx - shp.r - 1));
            const auto x1 = std::min(width, std::size_t(shp.cx + shp.r + 2));
            const auto y0 = std::size_t(std::max(0.0, shp.cy - shp.r - 1));
            const auto y1 = std::min(height, std::size_t(shp.cy + shp.r + 2));
            std::vector<std::pair<std::size_t, std::size_t>> pix;
            bool clash = false;
            for (std::size_t y = y0; y < y1 && !clash; ++y) {
                for (std::size_t x = x0; x < x1; ++x) {
                    if (shp.contains(x + 0.5, y + 0.5)) {
                        if (occupied[y * width + x]) {
                            clash = true;
                            break;
                        }
                        pix.emplace_back(y, x);
                    }
                }
            }
            if (clash || pix.size() < 12) continue;
            ok = true;
            const double shade = uniform(rng, -0.08, 0.08);
            for (auto [y, x] : pix) {
                scene.labels.at(y, x) = cls;
                const double t = shade * ((x - shp.cx) / shp.r);
                for (int k = 0; k < 3; ++k) scene.pixels.at(y, x, k) = color[k] + t;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const long yy = long(y) + dy, xx = long(x) + dx;
                        if (yy >= 0 && xx >= 0 && yy < long(height) && xx < long(width)) occupied[yy * width + xx] = 1;
                    }
                }
            }
        }
        placed += ok;
    }
    if (placed == 0) throw InvalidArgument("render_scene: could not place any shape");
    for (double& v : scene.pixels.storage()) v = quantize(v);
    return scene;
}

Grid3<double> apply_gap(const Grid3<double>& rgb, const DomainGapSpec& gap, std::uint64_t seed) {
    if (gap.hue_shift < 0 || gap.noise_sigma < 0 || gap.texture_strength < 0 || gap.blur_radius < 0) {
        throw InvalidArgument("DomainGapSpec: all components must be non-negative");
    }
    Grid3<double> out = rgb;
    if (gap.is_zero()) return out;
    Rng rng(seed);
    const std::size_t H = out.height(), W = out.width();

    if (gap.hue_shift > 0) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                auto px = out.pixel(y, x);
                auto hsv = rgb_to_hsv(px[0], px[1], px[2]);
                auto c = hsv_to_rgb(hsv[0] + gap.hue_shift, hsv[1], hsv[2]);
                for (int k = 0; k < 3; ++k) px[k] = c[k];
            }
        }
    }
    if (gap.blur_radius > 0) {
        const double sigma = gap.blur_radius;
        const int rad = std::max(1, int(std::ceil(2.0 * sigma)));
        std::vector<double> kern(2 * rad + 1);
        double norm = 0;
        for (int i = -rad; i <= rad; ++i) norm += kern[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
        for (double& k : kern) k /= norm;
        Grid3<double> tmp(H, W, 3);
        auto clampi = [](long v, long n) { return std::clamp(v, 0L, n - 1); };
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
                for (int k = 0; k < 3; ++k) {
                    double s = 0;
                    for (int i = -rad; i <= rad; ++i) s += kern[i + rad] * out.at(y, clampi(long(x) + i, W), k);
                    tmp.at(y, x, k) = s;
                }
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
                for (int k = 0; k < 3; ++k) {
                    double s = 0;
                    for (int i = -rad; i <= rad; ++i) s += kern[i + rad] * tmp.at(clampi(long(y) + i, H), x, k);
                    out.at(y, x, k) = s;
                }
    }
    // Draw texture parameters unconditionally so the noise stream does not
    // depend on whether texture is enabled.
    const double theta = uniform(rng, 0, std::numbers::pi);
    const double period = uniform(rng, 4.0, 9.0);
    const double phase = uniform(rng, 0, 2 * std::numbers::pi);
    if (gap.texture_strength > 0) {
        const double fx = std::cos(theta) / period, fy = std::sin(theta) / period;
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                const double t = gap.texture_strength * std::sin(2 * std::numbers::pi * (fx * x + fy * y) + phase);
                for (int k = 0; k < 3; ++k) out.at(y, x, k) += t;
            }
    }
    if (gap.noise_sigma > 0) {
        std::normal_distribution<double> noise(0.0, gap.noise_sigma);
        for (double& v : out.storage()) v += noise(rng);
    }
    for (double& v : out.storage()) v = quantize(v);
    return out;
}

ToyShapes generate_toyshapes(const ToyShapesConfig& cfg) {
    if (cfg.n_source < 1 || cfg.n_target < 1 || cfg.n_val < 1) {
        throw InvalidArgument("generate_toyshapes: split counts must be >= 1");
    }
    ToyShapes out;
    for (auto* split : {&out.source, &out.target_train, &out.target_val}) split->class_names = toyshapes_class_names();

    auto make = [&](DatasetSplit& split, const std::string& tag, std::size_t n, Domain domain) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto s = scene_seed(cfg.seed, tag, i);
            Scene scene = render_scene(s, cfg.height, cfg.width);
            Grid3<double> px = domain == Domain::target
                                   ? apply_gap(scene.pixels, cfg.gap, derive_seed(s, {"gap"}))
                                   : std::move(scene.pixels);
            char id[32];
            std::snprintf(id, sizeof id, "%s_%05zu", tag.c_str(), i);
            split.items.push_back({SegImage(id, std::move(px), domain), std::move(scene.labels)});
        }
    };
    make(out.source, "source", cfg.n_source, Domain::source);
    make(out.target_train, "target", cfg.n_target, Domain::target);
    make(out.target_val, "val", cfg.n_val, Domain::target);
    return out;
}

}  // namespace padapt
