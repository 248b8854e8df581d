#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsmap/tensor.hpp"

namespace dsmap {

/// 8-bit RGB raster, rows top to bottom, interleaved channels.
struct ImageU8 {
    int64_t width = 0;
    int64_t height = 0;
    std::vector<uint8_t> rgb;  // width * height * 3 bytes

    uint8_t at(int64_t y, int64_t x, int64_t c) const {
        return rgb[static_cast<size_t>((y * width + x) * 3 + c)];
    }
    uint8_t& at(int64_t y, int64_t x, int64_t c) {
        return rgb[static_cast<size_t>((y * width + x) * 3 + c)];
    }
};

/// Decodes a PNG or JPEG file (sniffed by signature) into 8-bit RGB.
/// Grayscale, palette and alpha inputs are converted. Throws IoError on
/// unreadable or undecodable files.
ImageU8 read_image(const std::string& path);

/// Writes 8-bit RGB PNG with fixed settings; output bytes depend only
/// on the pixels, never on the clock.
void write_png(const std::string& path, const ImageU8& img);

ImageU8 resize_bilinear(const ImageU8& img, int64_t out_width, int64_t out_height);

/// u8 [0,255] -> [-1,1], layout 3 x height x width inside a singleton
/// batch: returns 1 x 3 x H x W.
Tensor image_to_tensor(const ImageU8& img);

/// Inverse of image_to_tensor for one batch element: clamps to [-1,1],
/// maps to [0,255] and rounds to nearest. Exact round trip for inputs
/// that came from image_to_tensor.
ImageU8 tensor_to_image(const Tensor& batch, int64_t index = 0);

}  // namespace dsmap
