#pragma once

#include "splatprune/types.hpp"

#include <string>

namespace splat {

/// Loads an 8-bit PNG as linear [0,1] RGB (value / 255, no gamma decode by
/// default). Gray and paletted files are expanded; alpha is stripped.
Image load_png(const std::string& path, bool gamma_decode = false);

/// Writes an 8-bit RGB PNG. Values are clamped to [0,1] and written linearly
/// unless gamma_encode applies a single 1/2.2 encode.
void save_png(const std::string& path, const Image& image, bool gamma_encode = false);

void save_png_gray(const std::string& path, const GrayImage& image);

} // namespace splat
