#pragma once

#include <string>

#include "fsenet/tensor.hpp"

namespace fsenet {

/// Loads an 8-bit PNG or JPEG (by file suffix) as a [0,1] float tensor,
/// RGB order, 1 or 3 channels. 16-bit PNGs are rejected.
Image load_image(const std::string& path);

/// Writes an 8-bit PNG or JPEG (by file suffix). Values are clamped to
/// [0,1] and rounded. 1-channel tensors become grayscale files.
void save_image(const Image& img, const std::string& path);

}  // namespace fsenet
