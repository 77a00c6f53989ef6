#pragma once

#include <string>

#include "dermscan/image.hpp"

namespace dermscan {

/// Decodes any 8/16-bit PNG to 8-bit RGB (alpha dropped, gray expanded).
RasterImage read_png(const std::string& path);
void write_png(const std::string& path, const RasterImage& image);

/// Masks are stored as 1-channel PNG with 0/255 samples; any nonzero sample
/// reads back as foreground.
BinaryMask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const BinaryMask& mask);

}  // namespace dermscan
