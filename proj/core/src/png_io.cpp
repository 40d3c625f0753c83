#include "ldp/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "ldp/errors.hpp"

namespace ldp {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// decoded 8-bit RGB rows
struct RawImage {
    int width  = 0;
    int height = 0;
    std::vector<unsigned char> rgb;  // height * width * 3
};

RawImage read_rgb8(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw LoadError("png '" + path + "': cannot open");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info  = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("png '" + path + "': libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("png '" + path + "': decode failed");
    }

    png_init_io(png, file.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    RawImage image;
    image.width  = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    image.rgb.resize(static_cast<size_t>(image.width) * image.height * 3);

    std::vector<png_bytep> rows(static_cast<size_t>(image.height));
    for (int y = 0; y < image.height; ++y) {
        rows[static_cast<size_t>(y)] = image.rgb.data() + static_cast<size_t>(y) * image.width * 3;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_rgb8(const std::string& path, int width, int height,
                const std::vector<unsigned char>& rgb, bool gray) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw LoadError("png '" + path + "': cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info  = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw LoadError("png '" + path + "': libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw LoadError("png '" + path + "': encode failed");
    }

    png_init_io(png, file.get());
    const int channels = gray ? 1 : 3;
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 gray ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<size_t>(y)] =
            const_cast<unsigned char*>(rgb.data()) + static_cast<size_t>(y) * width * channels;
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

unsigned char quantize(double v) {
    const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

}  // namespace

Tensor read_png_rgb(const std::string& path) {
    const RawImage raw = read_rgb8(path);
    Tensor out({3, raw.height, raw.width});
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            const size_t base = (static_cast<size_t>(y) * raw.width + x) * 3;
            for (int c = 0; c < 3; ++c) {
                out.at(c, y, x) = raw.rgb[base + static_cast<size_t>(c)] / 255.0;
            }
        }
    }
    return out;
}

Tensor read_png_gray(const std::string& path) {
    const RawImage raw = read_rgb8(path);
    Tensor out({1, raw.height, raw.width});
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            const size_t base = (static_cast<size_t>(y) * raw.width + x) * 3;
            // Rec. 601 luminance
            const double lum = 0.299 * raw.rgb[base] + 0.587 * raw.rgb[base + 1] +
                               0.114 * raw.rgb[base + 2];
            out.at(0, y, x) = lum / 255.0;
        }
    }
    return out;
}

void write_png_rgb(const std::string& path, const Tensor& image) {
    if (image.shape().size() != 3 || image.dim(0) != 3) {
        throw ArgumentError("write_png_rgb: expected {3,H,W}, got " + shape_str(image.shape()));
    }
    const int h = image.dim(1), w = image.dim(2);
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t base = (static_cast<size_t>(y) * w + x) * 3;
            for (int c = 0; c < 3; ++c) rgb[base + static_cast<size_t>(c)] = quantize(image.at(c, y, x));
        }
    }
    write_rgb8(path, w, h, rgb, /*gray=*/false);
}

void write_png_gray(const std::string& path, const Tensor& image) {
    if (image.shape().size() != 3 || image.dim(0) != 1) {
        throw ArgumentError("write_png_gray: expected {1,H,W}, got " + shape_str(image.shape()));
    }
    const int h = image.dim(1), w = image.dim(2);
    std::vector<unsigned char> gray(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            gray[static_cast<size_t>(y) * w + x] = quantize(image.at(0, y, x));
        }
    }
    write_rgb8(path, w, h, gray, /*gray=*/true);
}

}  // namespace ldp
