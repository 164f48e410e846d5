#include "photoscore/image.hpp"

#include <algorithm>

#include "photoscore/error.hpp"

namespace photoscore {

Image::Image(int width, int height, Rgb fill)
    : Image(width, height,
            std::vector<Rgb>(static_cast<std::size_t>(std::max(width, 0)) *
                                 static_cast<std::size_t>(std::max(height, 0)),
                             fill)) {}

Image::Image(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw Error("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw Error("pixel count does not match width x height");
    for (const Rgb& p : pixels_) {
        if (!(p.r >= 0.0 && p.r <= 1.0 && p.g >= 0.0 && p.g <= 1.0 && p.b >= 0.0 && p.b <= 1.0))
            throw Error("pixel channel outside [0,1]");
    }
}

BoundingBox union_hull(std::span<const BoundingBox> boxes) {
    if (boxes.empty()) throw Error("union_hull of no boxes");
    BoundingBox hull = boxes.front();
    for (const BoundingBox& b : boxes.subspan(1)) {
        hull.left = std::min(hull.left, b.left);
        hull.top = std::min(hull.top, b.top);
        hull.right = std::max(hull.right, b.right);
        hull.bottom = std::max(hull.bottom, b.bottom);
    }
    return hull;
}

std::size_t Mask::count(Region r) const noexcept {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), r));
}

Mask Mask::inverted() const {
    Mask out = *this;
    for (Region& r : out.labels_)
        r = r == Region::Foreground ? Region::Background : Region::Foreground;
    return out;
}

double mask_iou(const Mask& a, const Mask& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw Error("mask_iou: dimension mismatch");
    std::size_t inter = 0, uni = 0;
    auto la = a.labels();
    auto lb = b.labels();
    for (std::size_t i = 0; i < la.size(); ++i) {
        const bool fa = la[i] == Region::Foreground;
        const bool fb = lb[i] == Region::Foreground;
        inter += (fa && fb) ? 1 : 0;
        uni += (fa || fb) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace photoscore
