#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace photoscore {

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major RGB raster, each channel normalized to [0,1].
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {});
    Image(int width, int height, std::vector<Rgb> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
    Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

    std::span<const Rgb> pixels() const noexcept { return pixels_; }
    std::span<Rgb> pixels() noexcept { return pixels_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

// Pixel rectangle with exclusive right/bottom edges: covers columns
// [left, right) and rows [top, bottom).
struct BoundingBox {
    int left = 0;
    int top = 0;
    int right = 0;
    int bottom = 0;

    int width() const noexcept { return right - left; }
    int height() const noexcept { return bottom - top; }
    long long area() const noexcept {
        return static_cast<long long>(width()) * static_cast<long long>(height());
    }
    bool contains(int x, int y) const noexcept {
        return x >= left && x < right && y >= top && y < bottom;
    }
    // 0 <= left < right <= width and 0 <= top < bottom <= height.
    bool valid_for(int image_width, int image_height) const noexcept {
        return left >= 0 && left < right && right <= image_width && top >= 0 && top < bottom &&
               bottom <= image_height;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Smallest box covering every input box. Precondition: boxes non-empty.
BoundingBox union_hull(std::span<const BoundingBox> boxes);

enum class Region : std::uint8_t { Background = 0, Foreground = 1 };

// Binary foreground/background labelling with the dimensions of its image.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, Region fill = Region::Background)
        : width_(width), height_(height),
          labels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return labels_.size(); }

    Region at(int x, int y) const { return labels_[index(x, y)]; }
    void set(int x, int y, Region r) { labels_[index(x, y)] = r; }
    bool foreground(int x, int y) const { return at(x, y) == Region::Foreground; }

    std::span<const Region> labels() const noexcept { return labels_; }
    std::span<Region> labels() noexcept { return labels_; }

    std::size_t count(Region r) const noexcept;
    Mask inverted() const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Region> labels_;
};

// |A ∩ B| / |A ∪ B| over foreground pixels; 1 when both are empty.
double mask_iou(const Mask& a, const Mask& b);

}  // namespace photoscore
