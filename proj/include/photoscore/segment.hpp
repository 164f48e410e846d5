#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "photoscore/image.hpp"

namespace photoscore {

struct GrabCutParams {
    int gmm_components = 5;
    double gamma = 50.0;
    int max_iterations = 5;
    double convergence_fraction = 0.001;
    std::uint64_t seed = 42;
};

struct GrabCutResult {
    Mask mask;
    // energy[0] is the energy of the initial box labelling under the initial
    // colour models; energy[t] the energy after iteration t.
    std::vector<double> energy;
    int iterations = 0;
    double changed_fraction = 0.0;  // of the last iteration
};

// Foreground extraction seeded by `seed_box`: everything outside the box is
// fixed background. Throws Error when the box leaves no background pixels.
GrabCutResult grabcut_traced(const Image& img, const BoundingBox& seed_box,
                             const GrabCutParams& params = {});
Mask grabcut(const Image& img, const BoundingBox& seed_box, const GrabCutParams& params = {});

inline constexpr double kInfiniteAreaRatio = std::numeric_limits<double>::infinity();

struct RegionalFeatures {
    // |FG| / |BG|; kInfiniteAreaRatio when the background is empty.
    double fgbg_area_ratio = 0;
    std::optional<double> bgfg_brightness_diff;
    std::optional<double> bgfg_contrast_diff;
    std::optional<double> bg_lightness;      // mean ||rgb - white|| / sqrt(3)
    std::optional<double> bg_nonuniformity;  // population sd of bg luminance
};

RegionalFeatures regional_features(const Image& img, const Mask& mask);

}  // namespace photoscore
