#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "photoscore/image.hpp"

namespace photoscore {

using Bytes = std::vector<std::uint8_t>;

// Decodes a PNG or JPEG payload. Grayscale and palette sources are expanded
// to RGB by channel replication; alpha is composited over white. An 8-bit
// channel value v becomes v/255.
Image decode_image(std::span<const std::uint8_t> bytes);

// Width and height from the file header without decoding pixels.
std::pair<int, int> probe_dimensions(std::span<const std::uint8_t> bytes);

// 8-bit RGB PNG; channels are rounded to the nearest 1/255 step.
Bytes encode_png(const Image& img);
// 8-bit grayscale PNG: 0 = background, 255 = foreground.
Bytes encode_mask_png(const Mask& mask);
Bytes encode_jpeg(const Image& img, int quality = 95);

// Mask from an 8-bit grayscale PNG; any nonzero value is foreground.
Mask decode_mask_png(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
Image load_image(const std::filesystem::path& path);

// Rounds each channel to the 8-bit grid, so an image matches its PNG decode.
Image quantize_8bit(const Image& img);

}  // namespace photoscore
