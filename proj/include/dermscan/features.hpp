#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dermscan/image.hpp"

namespace dermscan {

struct LesionSegmentation;

enum class FeatureCategory { Color, Border, Asymmetry, Texture };
std::string_view category_name(FeatureCategory c);

/// Classifier block a feature feeds. Texture splits into GLCM+edge and LBP.
enum class FeatureBlock { Color, Border, Asymmetry, GlcmEdge, Lbp };
std::string_view block_name(FeatureBlock b);

struct FeatureInfo {
  std::string name;
  FeatureCategory category;
  FeatureBlock block;
};

/// The fixed 116-entry catalog: 54 color, 16 border, 1 asymmetry, 45 texture.
const std::vector<FeatureInfo>& feature_catalog();
std::size_t catalog_index(std::string_view name);
std::vector<std::size_t> block_indices(FeatureBlock block);

struct FeatureVector {
  std::vector<double> values;  // aligned with feature_catalog()
  std::string image_id;
  std::string mask_id;
};

/// Rows are samples, columns features.
using FeatureMatrix = std::vector<std::vector<double>>;

/// Red, green, blue, gray, hue, value, in that order.
struct LesionChannels {
  std::array<ChannelPlane, 6> planes;
  const ChannelPlane& red() const { return planes[0]; }
  const ChannelPlane& gray() const { return planes[3]; }
  const ChannelPlane& hue() const { return planes[4]; }
};
LesionChannels make_channels(const RasterImage& image);

// --- color ---------------------------------------------------------------

/// Mean and population variance per channel: {mean_red, var_red, ...}.
std::array<double, 12> color_basic(const LesionChannels& channels, const BinaryMask& mask);

/// Non-empty bins of a 16-bin histogram over [0,255].
int nonzero_bins(std::span<const double> values);
std::array<double, 6> color_hist_nonzero(const LesionChannels& channels, const BinaryMask& mask);

struct CtParams {
  int parts = 16;    // PA
  int subparts = 8;  // SP
};

/// Per-pixel layout of the triangular parts and their bands.
struct TriangleLayout {
  std::vector<int> part;  // aligned with region.pixels
  std::vector<int> band;
  bool centroid_outside = false;
};

/// Centroid distance of each region pixel over the boundary distance along
/// the same ray (farthest crossing of the closed boundary polygon).
std::vector<double> radial_fractions(const Region& region, const Boundary& boundary);

/// Splits the boundary (starting at its left-most pixel) into `parts` arcs
/// of equal pixel count. A lesion pixel belongs to the part whose angular
/// sector, seen from the centre of mass, contains it, and to band
/// floor(subparts * r / R(theta)). `fractions` may carry precomputed
/// radial_fractions.
TriangleLayout triangle_layout(const Region& region, const Boundary& boundary, CtParams params,
                               std::span<const double> fractions = {});

struct CtResult {
  double value = 0.0;
  bool centroid_outside = false;
};

/// Maximum Euclidean distance between the per-part vectors of band means.
/// Empty bands take the part mean; empty parts take the lesion mean.
CtResult color_triangle(const ChannelPlane& channel, const Region& region, const Boundary& boundary, CtParams params);
double color_triangle_value(const ChannelPlane& channel, const Region& region, const TriangleLayout& layout,
                            CtParams params);

// --- border --------------------------------------------------------------

struct ShapeFeatures {
  double compactness = 0.0;  // 4 pi A / P^2, P = chain length + pi
  double solidity = 0.0;     // A / area of the hull of the pixel squares
  double convexity = 0.0;    // hull perimeter / chain length, both through pixel centres
  double distance_variance = 0.0;  // var / mean^2 of boundary-to-centroid distances
};
ShapeFeatures border_shape(const Region& region, const Boundary& boundary);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct AngleStats {
  double mean = 0.0;
  double variance = 0.0;
};

/// Fits each of `segments` equal-count pieces of the closed contour with an
/// orthogonal-regression line and summarizes the acute angles between
/// consecutive lines, the closing pair included.
AngleStats border_fitting(std::span<const Vec2> contour, int segments);
AngleStats border_fitting(std::span<const Point> contour, int segments);

// --- asymmetry -----------------------------------------------------------

struct AsymmetryResult {
  double value = 0.0;
  double axis_angle = 0.0;  // major axis direction, radians
  bool isotropic = false;   // principal axes undefined; image axes used
};

/// Folds the lesion over its major and minor axes; each fold contributes
/// the number of pixels whose mirror image falls outside the lesion.
AsymmetryResult asymmetry(const Region& region);

// --- texture -------------------------------------------------------------

struct GlcmFeatures {
  double contrast = 0.0;
  double energy = 0.0;
  double correlation = 0.0;
  double homogeneity = 0.0;
};

/// Horizontal right-neighbour co-occurrences of in-mask pixels quantized to
/// `levels` equal bins over [0,255].
GlcmFeatures glcm_features(const ChannelPlane& gray, const BinaryMask& mask, int levels);

/// Canny with sigma 1.4; the high threshold is the Otsu level of the in-mask
/// gradient-magnitude histogram and the low one half of it.
BinaryMask canny_edges(const ChannelPlane& gray, const BinaryMask& mask, double sigma = 1.4);
double edge_density(const ChannelPlane& gray, const BinaryMask& mask);

/// The 36 rotation-minimal 8-bit codes in increasing order.
const std::array<int, 36>& lbp_classes();
/// Class index (0..35) of any 8-bit code.
int lbp_class(int code);
/// Minimal circular rotation of an 8-bit code.
int lbp_min_rotation(int code);

/// Rotation-invariant sign-LBP over the 3x3 ring, L1-normalized.
std::array<double, 36> lbp_s_histogram(const ChannelPlane& gray, const BinaryMask& mask);

// --- whole catalog ---------------------------------------------------------

struct ExtractionFlags {
  bool boundary_degenerate = false;
  bool ct_centroid_outside = false;
  bool asymmetry_isotropic = false;
};

FeatureVector extract_all(const RasterImage& image, const BinaryMask& lesion, ExtractionFlags* flags = nullptr);
FeatureVector extract_all(const RasterImage& image, const LesionSegmentation& seg, ExtractionFlags* flags = nullptr);

}  // namespace dermscan
