#include "splatprune/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace splat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

unsigned char quantize(double v, bool gamma_encode) {
    v = std::clamp(v, 0.0, 1.0);
    if (gamma_encode) {
        v = std::pow(v, 1.0 / 2.2);
    }
    return static_cast<unsigned char>(std::lround(v * 255.0));
}

void write_rows(const std::string& path, int width, int height,
                const std::vector<unsigned char>& rgb) {
    const std::string tmp = path + ".tmp";
    FilePtr file(std::fopen(tmp.c_str(), "wb"));
    if (!file) {
        throw IoError("cannot open " + tmp + " for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing " + tmp);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < height; ++r) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(r) * width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    file.reset();
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

} // namespace

Image load_png(const std::string& path, bool gamma_decode) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw IoError("cannot open " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path + ": not a valid PNG");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_expand_gray_1_2_4_to_8(png);
        png_set_gray_to_rgb(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    std::vector<unsigned char> row(png_get_rowbytes(png, info));
    Image out(width, height);
    for (int r = 0; r < height; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                double v = row[static_cast<std::size_t>(c) * 3 + ch] / 255.0;
                if (gamma_decode) {
                    v = std::pow(v, 2.2);
                }
                out.at(r, c, ch) = v;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void save_png(const std::string& path, const Image& image, bool gamma_encode) {
    std::vector<unsigned char> rgb(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        rgb[i] = quantize(image.data[i], gamma_encode);
    }
    write_rows(path, image.width, image.height, rgb);
}

void save_png_gray(const std::string& path, const GrayImage& image) {
    std::vector<unsigned char> rgb(image.data.size() * 3);
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const unsigned char v = quantize(image.data[i], false);
        rgb[i * 3] = v;
        rgb[i * 3 + 1] = v;
        rgb[i * 3 + 2] = v;
    }
    write_rows(path, image.width, image.height, rgb);
}

} // namespace splat
