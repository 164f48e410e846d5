#pragma once

#include <span>
#include <vector>

#include "photoscore/image.hpp"

namespace photoscore {

// L = 0.3R + 0.6G + 0.1B
inline double luminance(const Rgb& p) noexcept { return 0.3 * p.r + 0.6 * p.g + 0.1 * p.b; }

std::vector<double> to_grayscale(const Image& img);

// (max - min) / (max + min); 0 for an empty set or when max + min == 0.
double michelson_contrast(std::span<const double> luminances) noexcept;

struct GlobalFeatures {
    double brightness = 0;     // mean L
    double contrast = 0;       // Michelson contrast of L
    double dynamic_range = 0;  // max L - min L
    int width = 0;
    int height = 0;
    double resolution = 0;  // megapixels
};

GlobalFeatures global_features(const Image& img);

}  // namespace photoscore
