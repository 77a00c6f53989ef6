#pragma once

#include <array>
#include <span>
#include <vector>

#include "dermscan/image.hpp"

namespace dermscan {

/// gray = 0.299 R + 0.587 G + 0.114 B, unrounded.
ChannelPlane to_gray(const RasterImage& image);

struct HsvPlanes {
  ChannelPlane hue;  // hexcone hue scaled to [0,255); 0 where chroma is 0
  ChannelPlane sat;  // (max-min)/max scaled to [0,255]
  ChannelPlane val;  // max(R,G,B)
};
HsvPlanes to_hsv(const RasterImage& image);

/// Single-channel R, G or B as a plane.
ChannelPlane channel(const RasterImage& image, int index);

/// Shrinks so the longest side is at most max_dim, keeping aspect. Large
/// reductions are box-decimated by the integer factor first, then finished
/// with bilinear sampling. Identity when the image already fits.
RasterImage downsample(const RasterImage& image, int max_dim);

/// Nearest-neighbour mask resampling to an arbitrary size.
BinaryMask resize_nearest(const BinaryMask& mask, int width, int height);

RasterImage crop(const RasterImage& image, const Box& box);
ChannelPlane crop(const ChannelPlane& plane, const Box& box);
BinaryMask crop(const BinaryMask& mask, const Box& box);

/// Separable Gaussian with replicated borders. sigma <= 0 returns a copy.
ChannelPlane gaussian_blur(const ChannelPlane& plane, double sigma);

/// Sets every background pixel not 4-connected to the mask border.
BinaryMask fill_holes(const BinaryMask& mask);

/// Window-majority smoothing, repeated until the mask stops changing so that
/// the result is a fixed point of one more pass. Windows are truncated at the
/// image border; an exact tie keeps the pixel's current value.
BinaryMask majority_filter(const BinaryMask& mask, int window = 5);

/// One pass of the window-majority rule.
BinaryMask majority_pass(const BinaryMask& mask, int window);

/// Foreground components in order of their first pixel in raster order.
std::vector<Region> connected_components(const BinaryMask& mask, int connectivity = 8);

/// Largest 8-connected component as a mask (empty mask if none). Ties keep the
/// earlier component in raster order.
BinaryMask largest_component(const BinaryMask& mask);

/// Moore-neighbour trace, clockwise on screen (y down), starting at the
/// left-most pixel (top-most on ties). The loop is closed implicitly: the
/// first point is not repeated at the end. Regions smaller than 4 pixels, or
/// ones whose trace revisits a pixel (1-pixel-thin parts), are flagged.
Boundary trace_boundary(const Region& region);

/// Threshold t in [1,255] maximizing between-class variance when levels < t
/// form the first class. Ties resolve to the lowest t. Requires at least two
/// non-empty bins.
int otsu_level(std::span<const long> histogram);

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);

}  // namespace dermscan
