#include "photoscore/features_global.hpp"

#include <algorithm>

namespace photoscore {

std::vector<double> to_grayscale(const Image& img) {
    std::vector<double> out;
    out.reserve(img.size());
    for (const Rgb& p : img.pixels()) out.push_back(luminance(p));
    return out;
}

double michelson_contrast(std::span<const double> luminances) noexcept {
    if (luminances.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(luminances.begin(), luminances.end());
    const double denom = *hi + *lo;
    return denom > 0.0 ? (*hi - *lo) / denom : 0.0;
}

GlobalFeatures global_features(const Image& img) {
    const std::vector<double> lum = to_grayscale(img);
    GlobalFeatures f;
    f.width = img.width();
    f.height = img.height();
    f.resolution = static_cast<double>(img.width()) * static_cast<double>(img.height()) / 1e6;
    if (lum.empty()) return f;

    double sum = 0.0;
    for (double l : lum) sum += l;
    f.brightness = sum / static_cast<double>(lum.size());
    const auto [lo, hi] = std::minmax_element(lum.begin(), lum.end());
    f.dynamic_range = *hi - *lo;
    f.contrast = michelson_contrast(lum);
    return f;
}

}  // namespace photoscore
