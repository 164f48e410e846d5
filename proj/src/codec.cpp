#include "photoscore/codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include <jpeglib.h>

#include "photoscore/error.hpp"

namespace photoscore {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> b) {
    return b.size() >= 8 && std::equal(b.begin(), b.begin() + 8, kPngSignature);
}

bool is_jpeg(std::span<const std::uint8_t> b) {
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw Error(std::string("invalid PNG payload: ") + img.message);
    img.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw Error("truncated or corrupt PNG payload: " + msg);
    }
    const int w = static_cast<int>(img.width);
    const int h = static_cast<int>(img.height);
    std::vector<Rgb> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < px.size(); ++i) {
        const std::uint8_t* p = &buf[4 * i];
        const double a = p[3] / 255.0;
        // composite over white
        px[i] = {a * (p[0] / 255.0) + (1.0 - a), a * (p[1] / 255.0) + (1.0 - a),
                 a * (p[2] / 255.0) + (1.0 - a)};
    }
    return Image(w, h, std::move(px));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
    bool warned;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

void jpeg_emit_message(j_common_ptr cinfo, int level) {
    // level -1 is a corrupt-data warning (e.g. premature end of file)
    if (level < 0) {
        auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
        if (!err->warned) (*cinfo->err->format_message)(cinfo, err->message);
        err->warned = true;
    }
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_emit_message;

    std::vector<std::uint8_t> raw;
    int w = 0, h = 0, channels = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(std::string("truncated or corrupt JPEG payload: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
        jpeg_destroy_decompress(&cinfo);
        throw Error("unsupported JPEG colour space (CMYK)");
    }
    cinfo.out_color_space = cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    channels = cinfo.output_components;
    raw.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(channels));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = raw.data() + static_cast<std::size_t>(cinfo.output_scanline) *
                                        static_cast<std::size_t>(w) *
                                        static_cast<std::size_t>(channels);
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (err.warned) throw Error(std::string("truncated or corrupt JPEG payload: ") + err.message);

    std::vector<Rgb> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (channels == 1) {
            const double v = raw[i] / 255.0;
            px[i] = {v, v, v};
        } else {
            const std::uint8_t* p = &raw[3 * i];
            px[i] = {p[0] / 255.0, p[1] / 255.0, p[2] / 255.0};
        }
    }
    return Image(w, h, std::move(px));
}

Bytes write_png(png_image& img, const void* buffer) {
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, buffer, 0, nullptr))
        throw Error(std::string("PNG encode failed: ") + img.message);
    Bytes out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, buffer, 0, nullptr))
        throw Error(std::string("PNG encode failed: ") + img.message);
    out.resize(size);
    return out;
}

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    throw Error("unsupported image format (expected PNG or JPEG)");
}

std::pair<int, int> probe_dimensions(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) {
        if (bytes.size() < 24) throw Error("truncated PNG header");
        return {static_cast<int>(read_be32(bytes, 16)), static_cast<int>(read_be32(bytes, 20))};
    }
    if (is_jpeg(bytes)) {
        std::size_t i = 2;
        while (i + 3 < bytes.size()) {
            if (bytes[i] != 0xFF) throw Error("corrupt JPEG marker stream");
            const std::uint8_t marker = bytes[i + 1];
            if (marker == 0xFF) {
                ++i;
                continue;
            }
            if (marker == 0x01 || (marker >= 0xD0 && marker <= 0xD9)) {
                i += 2;
                continue;
            }
            const std::size_t len = (std::size_t{bytes[i + 2]} << 8) | bytes[i + 3];
            const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 &&
                             marker != 0xC8 && marker != 0xCC;
            if (sof) {
                if (i + 9 > bytes.size()) break;
                const int h = (bytes[i + 5] << 8) | bytes[i + 6];
                const int w = (bytes[i + 7] << 8) | bytes[i + 8];
                return {w, h};
            }
            i += 2 + len;
        }
        throw Error("truncated JPEG header");
    }
    throw Error("unsupported image format (expected PNG or JPEG)");
}

Bytes encode_png(const Image& img) {
    png_image out{};
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(img.width());
    out.height = static_cast<png_uint_32>(img.height());
    out.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf;
    buf.reserve(img.size() * 3);
    for (const Rgb& p : img.pixels()) {
        buf.push_back(to_byte(p.r));
        buf.push_back(to_byte(p.g));
        buf.push_back(to_byte(p.b));
    }
    return write_png(out, buf.data());
}

Bytes encode_mask_png(const Mask& mask) {
    png_image out{};
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(mask.width());
    out.height = static_cast<png_uint_32>(mask.height());
    out.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buf;
    buf.reserve(mask.size());
    for (Region r : mask.labels()) buf.push_back(r == Region::Foreground ? 255 : 0);
    return write_png(out, buf.data());
}

Mask decode_mask_png(std::span<const std::uint8_t> bytes) {
    if (!is_png(bytes)) throw Error("mask must be a PNG");
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw Error(std::string("invalid PNG payload: ") + img.message);
    img.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error("truncated or corrupt PNG payload");
    }
    Mask mask(static_cast<int>(img.width), static_cast<int>(img.height));
    auto labels = mask.labels();
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = buf[i] != 0 ? Region::Foreground : Region::Background;
    return mask;
}

Bytes encode_jpeg(const Image& img, int quality) {
    jpeg_compress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    unsigned char* out = nullptr;
    unsigned long out_size = 0;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * 3);
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(out);
        throw Error(std::string("JPEG encode failed: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &out, &out_size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width());
    cinfo.image_height = static_cast<JDIMENSION>(img.height());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb& p = img.at(x, y);
            row[3 * x] = to_byte(p.r);
            row[3 * x + 1] = to_byte(p.g);
            row[3 * x + 2] = to_byte(p.b);
        }
        JSAMPROW ptr = row.data();
        jpeg_write_scanlines(&cinfo, &ptr, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    Bytes bytes(out, out + out_size);
    std::free(out);
    return bytes;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

Image load_image(const std::filesystem::path& path) {
    try {
        return decode_image(read_file(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

Image quantize_8bit(const Image& img) {
    std::vector<Rgb> px(img.pixels().begin(), img.pixels().end());
    for (Rgb& p : px) {
        p.r = to_byte(p.r) / 255.0;
        p.g = to_byte(p.g) / 255.0;
        p.b = to_byte(p.b) / 255.0;
    }
    return Image(img.width(), img.height(), std::move(px));
}

}  // namespace photoscore
