#pragma once
// ToyShapes-DA: a synthetic source/target pair with a photometric domain gap.
//
// Classes: 0 background, 1 circle, 2 triangle, 3 rectangle. Source renders
// draw shape colors around a class-specific hue; the target passes the same
// kind of render through a hue rotation, blur, stripe texture and noise, so
// the color cue a source-trained model picks up becomes unreliable while the
// label geometry is unchanged.

#include <cstdint>
#include <string>
#include <vector>

#include "padapt/data/dataset.hpp"

namespace padapt {

inline constexpr std::size_t kToyClasses = 4;
const std::vector<std::string>& toyshapes_class_names();

struct DomainGapSpec {
    double hue_shift = 0.15;        // fraction of a full hue turn
    double noise_sigma = 0.05;
    double texture_strength = 0.12;
    double blur_radius = 0.8;       // gaussian sigma in pixels

    bool is_zero() const noexcept {
        return hue_shift == 0.0 && noise_sigma == 0.0 && texture_strength == 0.0 && blur_radius == 0.0;
    }
};

struct ToyShapesConfig {
    std::uint64_t seed = 0;
    std::size_t n_source = 200;
    std::size_t n_target = 200;
    std::size_t n_val = 50;
    std::size_t height = 64;
    std::size_t width = 64;
    DomainGapSpec gap;
};

struct ToyShapes {
    DatasetSplit source;
    DatasetSplit target_train;
    DatasetSplit target_val;
};

struct Scene {
    Grid3<double> pixels;
    LabelMap labels;
};

/// Source-style render; a pure function of (seed, size). Pixels are multiples of 1/255.
Scene render_scene(std::uint64_t seed, std::size_t height, std::size_t width);

/// Photometric gap transform. The zero spec is the identity.
Grid3<double> apply_gap(const Grid3<double>& rgb, const DomainGapSpec& gap, std::uint64_t seed);

/// Seed used for the i-th item of a split ("source", "target", "val").
std::uint64_t scene_seed(std::uint64_t seed, const std::string& split, std::size_t index);

ToyShapes generate_toyshapes(const ToyShapesConfig& cfg);

}  // namespace padapt
