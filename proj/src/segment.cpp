#include "dermscan/segment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "dermscan/imgproc.hpp"

namespace dermscan {

void SegConfig::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) throw Error(ErrorKind::InvalidArgument, std::string(name) + " must lie in (0,1]");
  };
  fraction(valid_fraction, "valid_fraction");
  fraction(coarse_min_size, "coarse_min_size");
  fraction(fine_min_size, "fine_min_size");
  fraction(min_roi_fraction, "min_roi_fraction");
  fraction(crop_padding, "crop_padding");
  if (!(k_coarse > 0.0)) throw Error(ErrorKind::InvalidArgument, "k_coarse must be positive");
  if (coarse_max_dim < 32) throw Error(ErrorKind::InvalidArgument, "coarse_max_dim must be at least 32");
  if (majority_window < 3 || majority_window % 2 == 0)
    throw Error(ErrorKind::InvalidArgument, "majority_window must be odd and >= 3");
}

namespace {

int gray_level(double g) { return static_cast<int>(std::clamp(std::lround(g), 0L, 255L)); }

}  // namespace

OtsuResult otsu_threshold(const ChannelPlane& gray, const BinaryMask& mask, Polarity polarity) {
  if (!gray.same_shape(mask)) throw Error(ErrorKind::InvalidArgument, "gray plane and mask differ in size");
  std::array<long, 256> hist{};
  for (std::size_t i = 0; i < gray.size(); ++i)
    if (mask[i]) ++hist[gray_level(gray[i])];
  OtsuResult r;
  try {
    r.threshold = otsu_level(hist);
  } catch (const Error&) {
    throw Error(ErrorKind::Degenerate, "Otsu needs at least two distinct gray levels in the region");
  }
  r.seg = BinaryMask(gray.width(), gray.height(), 0);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    if (!mask[i]) continue;
    const bool below = gray_level(gray[i]) < r.threshold;
    r.seg[i] = (polarity == Polarity::Darker ? below : !below) ? 1 : 0;
  }
  return r;
}

namespace {

struct Edge {
  double w;
  int a;
  int b;
};

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Joins roots a and b; the merged internal difference becomes w.
  int join(int a, int b, double w) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    internal_[a] = w;
    return a;
  }
  long size(int root) const { return size_[root]; }
  double internal(int root) const { return internal_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<long> size_;
  std::vector<double> internal_;
};

}  // namespace

LabelMap mst_segment(const ChannelPlane& gray, const BinaryMask& mask, double k, long min_size) {
  if (!(k > 0.0)) throw Error(ErrorKind::InvalidArgument, "MST scale k must be positive");
  if (!gray.same_shape(mask)) throw Error(ErrorKind::InvalidArgument, "gray plane and mask differ in size");
  const int w = gray.width(), h = gray.height();

  Grid<int> node(w, h, -1);
  int n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) node[i] = n++;

  std::vector<Edge> edges;
  edges.reserve(4 * static_cast<std::size_t>(n));
  constexpr int ndx[4] = {1, 0, 1, -1};
  constexpr int ndy[4] = {0, 1, 1, 1};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int a = node(x, y);
      if (a < 0) continue;
      for (int d = 0; d < 4; ++d) {
        const int nx = x + ndx[d], ny = y + ndy[d];
        if (!node.in_bounds(nx, ny) || node(nx, ny) < 0) continue;
        edges.push_back({std::abs(gray(x, y) - gray(nx, ny)), a, node(nx, ny)});
      }
    }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) { return l.w < r.w; });

  DisjointSet ds(n);
  for (const Edge& e : edges) {
    const int a = ds.find(e.a), b = ds.find(e.b);
    if (a == b) continue;
    const double ta = ds.internal(a) + k / static_cast<double>(ds.size(a));
    const double tb = ds.internal(b) + k / static_cast<double>(ds.size(b));
    if (e.w <= std::min(ta, tb)) ds.join(a, b, e.w);
  }
  // Small components go to the neighbour reached through the cheapest edge.
  for (const Edge& e : edges) {
    const int a = ds.find(e.a), b = ds.find(e.b);
    if (a != b && (ds.size(a) < min_size || ds.size(b) < min_size)) ds.join(a, b, std::max({e.w, ds.internal(a), ds.internal(b)}));
  }

  LabelMap out{Grid<int>(w, h, -1), 0};
  std::vector<int> compact(n, -1);
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (node[i] < 0) continue;
    const int root = ds.find(node[i]);
    if (compact[root] < 0) compact[root] = out.count++;
    out.labels[i] = compact[root];
  }
  return out;
}

std::vector<Region> label_regions(const LabelMap& map) {
  std::vector<std::vector<Point>> buckets(map.count);
  for (int y = 0; y < map.labels.height(); ++y)
    for (int x = 0; x < map.labels.width(); ++x)
      if (map.labels(x, y) >= 0) buckets[map.labels(x, y)].push_back({x, y});
  std::vector<Region> regions;
  regions.reserve(buckets.size());
  for (auto& b : buckets)
    if (!b.empty()) regions.push_back(Region::from_pixels(std::move(b)));
  return regions;
}

double roi_center_weight(double dx_norm, double dy_norm) {
  const double bracket = std::max(0.0, 1.0 - 2.0 * std::sqrt(dx_norm * dx_norm + dy_norm * dy_norm));
  const double sq = bracket * bracket;
  return sq * sq;
}

double roi_score(double area, double cx, double cy, int width, int height) {
  return area * roi_center_weight(cx / width - 0.5, cy / height - 0.5);
}

double roi_score(const Region& region, int width, int height) {
  return roi_score(static_cast<double>(region.area), region.cx + 0.5, region.cy + 0.5, width, height);
}

std::optional<Region> select_roi(const std::vector<Region>& regions, int width, int height, const RoiFilter& filter) {
  const Region* best = nullptr;
  double best_score = -1.0;
  for (const Region& r : regions) {
    if (r.area < filter.min_area || r.touches_border(width, height)) continue;
    const double ox = std::abs(r.cx + 0.5 - width / 2.0);
    const double oy = std::abs(r.cy + 0.5 - height / 2.0);
    if (ox > filter.valid_fraction * width / 2.0 || oy > filter.valid_fraction * height / 2.0) continue;
    const double s = roi_score(r, width, height);
    if (s > best_score) {
      best_score = s;
      best = &r;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

Region filter_and_score_rois(const std::vector<Region>& regions, int width, int height, const SegConfig& cfg) {
  if (regions.empty()) throw Error(ErrorKind::InvalidArgument, "no candidate regions");
  const auto r = select_roi(regions, width, height, {cfg.valid_fraction, 1});
  if (!r) throw Error(ErrorKind::NoLesionFound, "no lesion found");
  return *r;
}

BinaryMask fuse_masks(const BinaryMask& otsu_seg, const BinaryMask& mst_seg, int window) {
  if (!otsu_seg.same_shape(mst_seg)) throw Error(ErrorKind::InvalidArgument, "mask dimensions differ");
  const BinaryMask u = mask_union(otsu_seg, mst_seg);
  if (count_foreground(u) == 0) throw Error(ErrorKind::NoLesionFound, "no lesion found: both segmentations are empty");
  const BinaryMask filtered = fill_holes(majority_filter(largest_component(u), window));
  return largest_component(filtered);
}

namespace {

struct StageParams {
  double k;
  long min_size;
  RoiFilter filter;
  int window;
  double sigma;
  Polarity polarity;
  SegMethods methods;
};

StageResult run_stage(const ChannelPlane& gray, const BinaryMask& mask, const StageParams& p) {
  const int w = gray.width(), h = gray.height();
  StageResult r{BinaryMask(w, h, 0), BinaryMask(w, h, 0), BinaryMask(w, h, 0)};

  if (p.methods != SegMethods::MstOnly) {
    try {
      const OtsuResult o = otsu_threshold(gray, mask, p.polarity);
      r.otsu_threshold = o.threshold;
      if (auto roi = select_roi(connected_components(o.seg, 8), w, h, p.filter)) {
        r.otsu = region_mask(*roi, w, h);
        r.otsu_score = roi_score(*roi, w, h);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Degenerate) throw;
    }
  }
  if (p.methods != SegMethods::OtsuOnly) {
    const LabelMap labels = mst_segment(gaussian_blur(gray, p.sigma), mask, p.k, p.min_size);
    if (auto roi = select_roi(label_regions(labels), w, h, p.filter)) {
      r.mst = region_mask(*roi, w, h);
      r.mst_score = roi_score(*roi, w, h);
    }
  }
  r.fused = fuse_masks(r.otsu, r.mst, p.window);
  if (count_foreground(r.fused) == 0) throw Error(ErrorKind::NoLesionFound, "no lesion found");
  return r;
}

long fraction_of(double f, long pixels) { return std::max(1L, std::lround(f * static_cast<double>(pixels))); }

}  // namespace

CoarseResult coarse_localize(const RasterImage& image, const BinaryMask& skin, const SegConfig& cfg) {
  cfg.validate();
  if (skin.width() != image.width() || skin.height() != image.height())
    throw Error(ErrorKind::InvalidArgument, "skin mask does not match the image");
  if (count_foreground(skin) == 0) throw Error(ErrorKind::NoLesionFound, "no lesion found: no skin detected");

  const RasterImage small = downsample(image, cfg.coarse_max_dim);
  const BinaryMask small_skin = resize_nearest(skin, small.width(), small.height());
  const long pixels = static_cast<long>(small.width()) * small.height();
  const StageParams params{cfg.k_coarse,
                           fraction_of(cfg.coarse_min_size, pixels),
                           {cfg.valid_fraction, fraction_of(cfg.min_roi_fraction, pixels)},
                           cfg.majority_window,
                           cfg.mst_sigma,
                           cfg.polarity,
                           cfg.methods};
  CoarseResult out;
  out.stage = run_stage(to_gray(small), small_skin, params);
  out.width = small.width();
  out.height = small.height();
  out.region = connected_components(out.stage.fused, 8).front();
  return out;
}

LesionSegmentation refine_border(const RasterImage& image, const BinaryMask& skin, const CoarseResult& coarse,
                                 const SegConfig& cfg) {
  cfg.validate();
  const double sx = static_cast<double>(image.width()) / coarse.width;
  const double sy = static_cast<double>(image.height()) / coarse.height;
  const Box& cb = coarse.region.bbox;
  const double x0 = cb.x0 * sx, x1 = (cb.x1 + 1) * sx;
  const double y0 = cb.y0 * sy, y1 = (cb.y1 + 1) * sy;
  const double px = cfg.crop_padding * (x1 - x0), py = cfg.crop_padding * (y1 - y0);
  Box crop_box{std::max(0, static_cast<int>(std::floor(x0 - px))), std::max(0, static_cast<int>(std::floor(y0 - py))),
               std::min(image.width() - 1, static_cast<int>(std::ceil(x1 + px)) - 1),
               std::min(image.height() - 1, static_cast<int>(std::ceil(y1 + py)) - 1)};
  if (crop_box.width() < 16 || crop_box.height() < 16)
    throw Error(ErrorKind::Degenerate, "lesion crop is degenerate (side below 16 px)");

  const RasterImage sub = crop(image, crop_box);
  const BinaryMask sub_skin = crop(skin, crop_box);
  const long pixels = static_cast<long>(sub.width()) * sub.height();
  const StageParams params{cfg.fine_k(),
                           fraction_of(cfg.fine_min_size, pixels),
                           {1.0, fraction_of(cfg.min_roi_fraction, pixels)},
                           cfg.majority_window,
                           cfg.mst_sigma,
                           cfg.polarity,
                           cfg.methods};
  LesionSegmentation out;
  out.coarse = coarse;
  out.crop = crop_box;
  out.fine_stage = run_stage(to_gray(sub), sub_skin, params);
  out.fine = BinaryMask(image.width(), image.height(), 0);
  for (int y = 0; y < sub.height(); ++y)
    for (int x = 0; x < sub.width(); ++x) out.fine(crop_box.x0 + x, crop_box.y0 + y) = out.fine_stage.fused(x, y);
  out.coarse_upsampled = resize_nearest(coarse.stage.fused, image.width(), image.height());
  return out;
}

LesionSegmentation segment_lesion(const RasterImage& image, const BinaryMask& skin, const SegConfig& cfg) {
  return refine_border(image, skin, coarse_localize(image, skin, cfg), cfg);
}

double tdr(const BinaryMask& gt, const BinaryMask& seg) {
  if (!gt.same_shape(seg)) throw Error(ErrorKind::InvalidArgument, "mask dimensions differ");
  long g = 0, both = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt[i]) continue;
    ++g;
    if (seg[i]) ++both;
  }
  if (g == 0) throw Error(ErrorKind::InvalidArgument, "ground truth mask is empty");
  return 100.0 * static_cast<double>(both) / static_cast<double>(g);
}

}  // namespace dermscan
