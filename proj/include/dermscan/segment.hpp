#pragma once

#include <optional>
#include <vector>

#include "dermscan/image.hpp"

namespace dermscan {

enum class Polarity { Darker, Brighter };
enum class SegMethods { Both, OtsuOnly, MstOnly };

struct SegConfig {
  int coarse_max_dim = 256;
  double valid_fraction = 0.8;        // central box that must contain an ROI centroid
  double k_coarse = 200.0;            // MST scale
  double k_fine = -1.0;               // <= 0: k_coarse / 2
  double coarse_min_size = 0.002;     // MST minimum component, fraction of pixels
  double fine_min_size = 0.01;
  double min_roi_fraction = 0.002;    // candidate ROIs smaller than this are noise
  double crop_padding = 0.25;         // per side, fraction of the coarse box size
  int majority_window = 5;
  double mst_sigma = 0.8;             // Gaussian pre-smoothing of the MST input
  Polarity polarity = Polarity::Darker;
  SegMethods methods = SegMethods::Both;

  double fine_k() const { return k_fine > 0.0 ? k_fine : k_coarse / 2.0; }
  void validate() const;
};

struct OtsuResult {
  int threshold = 0;
  BinaryMask seg;  // in-mask pixels on the lesion side of the threshold
};

/// Otsu over the 256-bin histogram of in-mask gray levels (rounded). With
/// Darker polarity the lesion is the pixels strictly below the threshold.
OtsuResult otsu_threshold(const ChannelPlane& gray, const BinaryMask& mask, Polarity polarity = Polarity::Darker);

struct LabelMap {
  Grid<int> labels;  // -1 outside the mask
  int count = 0;
};

/// Felzenszwalb-Huttenlocher graph segmentation over in-mask pixels with an
/// 8-connected grid graph and |intensity difference| weights. Edges are
/// stably sorted, so equal weights are processed in generation order. Labels
/// are numbered by first appearance in raster order.
LabelMap mst_segment(const ChannelPlane& gray, const BinaryMask& mask, double k, long min_size);

std::vector<Region> label_regions(const LabelMap& map);

/// Centre weight max(0, 1 - 2*sqrt(dx^2 + dy^2))^4 for offsets normalized by
/// the image size.
double roi_center_weight(double dx_norm, double dy_norm);

/// A * weight, with (cx, cy) continuous image coordinates.
double roi_score(double area, double cx, double cy, int width, int height);

/// Pixel-index centroid score; pixel (i, j) covers [i, i+1) x [j, j+1).
double roi_score(const Region& region, int width, int height);

struct RoiFilter {
  double valid_fraction = 0.8;
  long min_area = 1;
};

/// Drops border-touching regions, regions whose centroid leaves the central
/// valid box and regions below min_area; returns the best-scoring survivor.
std::optional<Region> select_roi(const std::vector<Region>& regions, int width, int height, const RoiFilter& filter);

/// Throwing variant: NoLesionFound when nothing survives.
Region filter_and_score_rois(const std::vector<Region>& regions, int width, int height, const SegConfig& cfg);

/// union -> largest 8-component -> majority filter -> hole fill. The result
/// is one component (possibly empty if the filter erased everything).
BinaryMask fuse_masks(const BinaryMask& otsu_seg, const BinaryMask& mst_seg, int window);

struct StageResult {
  BinaryMask otsu;   // selected Otsu ROI (empty when the branch found none)
  BinaryMask mst;    // selected MST ROI
  BinaryMask fused;
  int otsu_threshold = -1;
  double otsu_score = 0.0;
  double mst_score = 0.0;
};

struct CoarseResult {
  Region region;       // downsampled coordinates
  StageResult stage;
  int width = 0;       // downsampled size
  int height = 0;
};

CoarseResult coarse_localize(const RasterImage& image, const BinaryMask& skin, const SegConfig& cfg);

struct LesionSegmentation {
  CoarseResult coarse;
  Box crop;                    // original coordinates
  StageResult fine_stage;      // crop coordinates
  BinaryMask fine;             // original resolution, one component
  BinaryMask coarse_upsampled; // coarse mask at original resolution
};

LesionSegmentation refine_border(const RasterImage& image, const BinaryMask& skin, const CoarseResult& coarse,
                                 const SegConfig& cfg);

/// coarse_localize followed by refine_border.
LesionSegmentation segment_lesion(const RasterImage& image, const BinaryMask& skin, const SegConfig& cfg);

/// 100 * |gt & seg| / |gt|.
double tdr(const BinaryMask& gt, const BinaryMask& seg);

}  // namespace dermscan
