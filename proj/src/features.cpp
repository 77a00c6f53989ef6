#include "dermscan/features.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "dermscan/imgproc.hpp"
#include "dermscan/segment.hpp"

namespace dermscan {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::array<const char*, 6> kChannelNames = {"red", "green", "blue", "gray", "hue", "value"};
constexpr std::array<int, 4> kCtParts = {4, 8, 12, 16};
constexpr std::array<int, 3> kCtSubparts = {2, 4, 8};
constexpr std::array<int, 6> kFitSegments = {8, 12, 16, 20, 24, 28};

std::vector<FeatureInfo> build_catalog() {
  std::vector<FeatureInfo> c;
  auto add = [&](std::string name, FeatureCategory cat, FeatureBlock block) {
    c.push_back({std::move(name), cat, block});
  };
  for (const char* ch : kChannelNames) {
    add(std::string("mean_") + ch, FeatureCategory::Color, FeatureBlock::Color);
    add(std::string("var_") + ch, FeatureCategory::Color, FeatureBlock::Color);
  }
  for (const char* ch : kChannelNames) add(std::string("num_") + ch, FeatureCategory::Color, FeatureBlock::Color);
  for (const char* ch : {"gray", "red", "hue"})
    for (int pa : kCtParts)
      for (int sp : kCtSubparts)
        add("ct_" + std::string(ch) + "_pa" + std::to_string(pa) + "_sp" + std::to_string(sp), FeatureCategory::Color,
            FeatureBlock::Color);

  for (const char* n : {"compactness", "solidity", "convexity", "border_distance_variance"})
    add(n, FeatureCategory::Border, FeatureBlock::Border);
  for (int nt : kFitSegments) {
    add("bf_mean_nt" + std::to_string(nt), FeatureCategory::Border, FeatureBlock::Border);
    add("bf_var_nt" + std::to_string(nt), FeatureCategory::Border, FeatureBlock::Border);
  }

  add("asymmetry", FeatureCategory::Asymmetry, FeatureBlock::Asymmetry);

  for (int levels : {32, 64})
    for (const char* n : {"contrast", "energy", "correlation", "homogeneity"})
      add("glcm" + std::to_string(levels) + "_" + n, FeatureCategory::Texture, FeatureBlock::GlcmEdge);
  add("edge_density", FeatureCategory::Texture, FeatureBlock::GlcmEdge);
  for (int i = 0; i < 36; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "lbp_s_%02d", i);
    add(buf, FeatureCategory::Texture, FeatureBlock::Lbp);
  }
  return c;
}

double wrap_two_pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  return a < 0.0 ? a + 2.0 * kPi : a;
}

void require_area(const BinaryMask& mask, std::size_t min_area, const char* what) {
  if (count_foreground(mask) < min_area)
    throw Error(ErrorKind::InsufficientData, std::string(what) + ": lesion mask too small");
}

}  // namespace

std::string_view category_name(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::Color: return "color";
    case FeatureCategory::Border: return "border";
    case FeatureCategory::Asymmetry: return "asymmetry";
    case FeatureCategory::Texture: return "texture";
  }
  return "?";
}

std::string_view block_name(FeatureBlock b) {
  switch (b) {
    case FeatureBlock::Color: return "color";
    case FeatureBlock::Border: return "border";
    case FeatureBlock::Asymmetry: return "asymmetry";
    case FeatureBlock::GlcmEdge: return "glcm_edge";
    case FeatureBlock::Lbp: return "lbp";
  }
  return "?";
}

const std::vector<FeatureInfo>& feature_catalog() {
  static const std::vector<FeatureInfo> catalog = build_catalog();
  return catalog;
}

std::size_t catalog_index(std::string_view name) {
  const auto& c = feature_catalog();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].name == name) return i;
  throw Error(ErrorKind::InvalidArgument, "unknown feature '" + std::string(name) + "'");
}

std::vector<std::size_t> block_indices(FeatureBlock block) {
  std::vector<std::size_t> out;
  const auto& c = feature_catalog();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].block == block) out.push_back(i);
  return out;
}

LesionChannels make_channels(const RasterImage& image) {
  HsvPlanes hsv = to_hsv(image);
  return {{channel(image, 0), channel(image, 1), channel(image, 2), to_gray(image), std::move(hsv.hue),
           std::move(hsv.val)}};
}

std::array<double, 12> color_basic(const LesionChannels& channels, const BinaryMask& mask) {
  require_area(mask, 16, "color statistics");
  std::array<double, 12> out{};
  for (int c = 0; c < 6; ++c) {
    const ChannelPlane& p = channels.planes[c];
    double sum = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (mask[i]) {
        sum += p[i];
        ++n;
      }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (mask[i]) ss += (p[i] - mean) * (p[i] - mean);
    out[2 * c] = mean;
    out[2 * c + 1] = ss / static_cast<double>(n);
  }
  return out;
}

int nonzero_bins(std::span<const double> values) {
  std::array<bool, 16> used{};
  for (double v : values) used[static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(v / 16.0)), 0, 15))] = true;
  return static_cast<int>(std::count(used.begin(), used.end(), true));
}

std::array<double, 6> color_hist_nonzero(const LesionChannels& channels, const BinaryMask& mask) {
  require_area(mask, 16, "histogram bins");
  std::array<double, 6> out{};
  for (int c = 0; c < 6; ++c) {
    std::vector<double> v;
    const ChannelPlane& p = channels.planes[c];
    for (std::size_t i = 0; i < p.size(); ++i)
      if (mask[i]) v.push_back(p[i]);
    out[c] = nonzero_bins(v);
  }
  return out;
}

std::vector<double> radial_fractions(const Region& region, const Boundary& boundary) {
  const auto& pts = boundary.points;
  const std::size_t n = pts.size();
  if (n < 3) throw Error(ErrorKind::InsufficientData, "color triangle: boundary too short");
  const double cx = region.cx, cy = region.cy;

  // Closed polygon through the boundary pixel centres, bucketed by the
  // angular span each edge covers as seen from the centroid.
  constexpr int kBuckets = 256;
  auto bucket_of = [](double a) {
    return std::clamp(static_cast<int>(wrap_two_pi(a) / (2.0 * kPi) * kBuckets), 0, kBuckets - 1);
  };
  std::vector<std::vector<std::size_t>> buckets(kBuckets);
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = pts[i], q = pts[(i + 1) % n];
    const double a0 = std::atan2(p.y - cy, p.x - cx);
    double span = std::atan2(q.y - cy, q.x - cx) - a0;
    while (span > kPi) span -= 2.0 * kPi;
    while (span < -kPi) span += 2.0 * kPi;
    const bool near = std::hypot(p.x - cx, p.y - cy) < 2.0 || std::hypot(q.x - cx, q.y - cy) < 2.0;
    if (near || std::abs(span) > kPi / 2) {
      for (auto& b : buckets) b.push_back(i);
      continue;
    }
    const int b0 = bucket_of(std::min(a0, a0 + span)), steps = bucket_of(std::max(a0, a0 + span)) - b0;
    const int count = ((steps % kBuckets) + kBuckets) % kBuckets;
    for (int k = -1; k <= count + 1; ++k) buckets[((b0 + k) % kBuckets + kBuckets) % kBuckets].push_back(i);
  }

  std::vector<double> out(region.pixels.size(), 0.0);
  for (std::size_t i = 0; i < region.pixels.size(); ++i) {
    const double dx = region.pixels[i].x - cx, dy = region.pixels[i].y - cy;
    if (dx == 0.0 && dy == 0.0) continue;
    // Pixel sits at s = 1 along c + s (dx, dy); the farthest edge crossing
    // gives the boundary distance.
    double s_max = 0.0;
    for (std::size_t e : buckets[bucket_of(std::atan2(dy, dx))]) {
      const Point p = pts[e], q = pts[(e + 1) % n];
      const double ex = q.x - p.x, ey = q.y - p.y, wx = p.x - cx, wy = p.y - cy;
      const double denom = dx * ey - dy * ex;
      if (denom == 0.0) continue;
      const double s = (wx * ey - wy * ex) / denom;
      const double u = (wx * dy - wy * dx) / denom;
      if (u >= 0.0 && u <= 1.0) s_max = std::max(s_max, s);
    }
    out[i] = s_max > 0.0 ? 1.0 / s_max : 1.0;
  }
  return out;
}

TriangleLayout triangle_layout(const Region& region, const Boundary& boundary, CtParams params,
                               std::span<const double> fractions) {
  const int pa = params.parts, sp = params.subparts;
  if (pa < 2 || sp < 1) throw Error(ErrorKind::InvalidArgument, "color triangle needs PA >= 2 and SP >= 1");
  const auto n = static_cast<long>(boundary.points.size());
  if (n < 2L * pa) throw Error(ErrorKind::InsufficientData, "color triangle: boundary too short for PA");
  if (region.area < static_cast<long>(pa) * sp) throw Error(ErrorKind::InsufficientData, "color triangle: area below PA*SP");
  std::vector<double> own;
  if (fractions.empty()) {
    own = radial_fractions(region, boundary);
    fractions = own;
  }
  if (fractions.size() != region.pixels.size())
    throw Error(ErrorKind::InvalidArgument, "radial fractions do not match the region");

  const double cx = region.cx, cy = region.cy;
  TriangleLayout out;
  {
    const Point c{static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy))};
    out.centroid_outside = !std::binary_search(region.pixels.begin(), region.pixels.end(), c, [](Point a, Point b) {
      return a.y != b.y ? a.y < b.y : a.x < b.x;
    });
  }

  const double origin = std::atan2(boundary.points[0].y - cy, boundary.points[0].x - cx);
  std::vector<double> start(pa);
  for (int p = 1; p < pa; ++p) {
    const Point b = boundary.points[static_cast<std::size_t>(static_cast<long>(p) * n / pa)];
    start[p] = std::max(start[p - 1], wrap_two_pi(std::atan2(b.y - cy, b.x - cx) - origin));
  }

  out.part.resize(region.pixels.size());
  out.band.resize(region.pixels.size());
  for (std::size_t i = 0; i < region.pixels.size(); ++i) {
    const double a = wrap_two_pi(std::atan2(region.pixels[i].y - cy, region.pixels[i].x - cx) - origin);
    out.part[i] = static_cast<int>(std::upper_bound(start.begin(), start.end(), a) - start.begin()) - 1;
    out.band[i] = std::clamp(static_cast<int>(std::floor(sp * fractions[i])), 0, sp - 1);
  }
  return out;
}

double color_triangle_value(const ChannelPlane& channel, const Region& region, const TriangleLayout& layout,
                            CtParams params) {
  const int pa = params.parts, sp = params.subparts;
  std::vector<double> band_sum(static_cast<std::size_t>(pa) * sp, 0.0), part_sum(pa, 0.0);
  std::vector<long> band_n(static_cast<std::size_t>(pa) * sp, 0), part_n(pa, 0);
  double total = 0.0;
  const double ref = channel(region.pixels[0].x, region.pixels[0].y);
  for (std::size_t i = 0; i < region.pixels.size(); ++i) {
    const double v = channel(region.pixels[i].x, region.pixels[i].y) - ref;
    const std::size_t k = static_cast<std::size_t>(layout.part[i]) * sp + layout.band[i];
    band_sum[k] += v;
    ++band_n[k];
    part_sum[layout.part[i]] += v;
    ++part_n[layout.part[i]];
    total += v;
  }
  const double lesion_mean = total / static_cast<double>(region.pixels.size());
  std::vector<std::vector<double>> vec(pa, std::vector<double>(sp));
  for (int p = 0; p < pa; ++p) {
    const double pm = part_n[p] ? part_sum[p] / part_n[p] : lesion_mean;
    for (int s = 0; s < sp; ++s) {
      const std::size_t k = static_cast<std::size_t>(p) * sp + s;
      vec[p][s] = band_n[k] ? band_sum[k] / band_n[k] : pm;
    }
  }
  double best = 0.0;
  for (int a = 0; a < pa; ++a)
    for (int b = a + 1; b < pa; ++b) {
      double d = 0.0;
      for (int s = 0; s < sp; ++s) d += (vec[a][s] - vec[b][s]) * (vec[a][s] - vec[b][s]);
      best = std::max(best, std::sqrt(d));
    }
  return best;
}

CtResult color_triangle(const ChannelPlane& channel, const Region& region, const Boundary& boundary, CtParams params) {
  const TriangleLayout layout = triangle_layout(region, boundary, params);
  return {color_triangle_value(channel, region, layout, params), layout.centroid_outside};
}

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_perimeter(const std::vector<Vec2>& poly) {
  double p = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    p += std::hypot(b.x - a.x, b.y - a.y);
  }
  return p;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2.0;
}

}  // namespace

ShapeFeatures border_shape(const Region& region, const Boundary& boundary) {
  const auto& b = boundary.points;
  if (b.size() < 3) throw Error(ErrorKind::Degenerate, "border shape: degenerate boundary");
  double chain = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Point p = b[i], q = b[(i + 1) % b.size()];
    chain += std::hypot(q.x - p.x, q.y - p.y);
  }
  std::vector<Vec2> centres, corners;
  for (const Point p : b) {
    centres.push_back({double(p.x), double(p.y)});
    for (double ox : {-0.5, 0.5})
      for (double oy : {-0.5, 0.5}) corners.push_back({p.x + ox, p.y + oy});
  }
  const double perimeter = chain + kPi;
  ShapeFeatures f;
  f.compactness = 4.0 * kPi * static_cast<double>(region.area) / (perimeter * perimeter);
  f.solidity = static_cast<double>(region.area) / polygon_area(convex_hull(corners));
  f.convexity = polygon_perimeter(convex_hull(centres)) / chain;

  std::vector<double> d;
  d.reserve(b.size());
  for (const Point p : b) d.push_back(std::hypot(p.x - region.cx, p.y - region.cy));
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d.size());
  f.distance_variance = mean > 0.0 ? var / (mean * mean) : 0.0;
  return f;
}

AngleStats border_fitting(std::span<const Vec2> contour, int segments) {
  if (segments < 2) throw Error(ErrorKind::InvalidArgument, "border fitting needs at least two segments");
  const auto n = static_cast<long>(contour.size());
  if (n < 4L * segments) throw Error(ErrorKind::InsufficientData, "border fitting: contour shorter than 4*nt");

  std::vector<double> direction(segments);
  for (int s = 0; s < segments; ++s) {
    const long a = s * n / segments, e = (s + 1) * n / segments;
    double mx = 0.0, my = 0.0;
    for (long i = a; i < e; ++i) {
      mx += contour[i].x;
      my += contour[i].y;
    }
    const double cnt = static_cast<double>(e - a);
    mx /= cnt;
    my /= cnt;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (long i = a; i < e; ++i) {
      const double dx = contour[i].x - mx, dy = contour[i].y - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
    if (sxx + syy <= 0.0) throw Error(ErrorKind::Degenerate, "border fitting: segment with zero spatial extent");
    direction[s] = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  }
  std::vector<double> angle(segments);
  for (int s = 0; s < segments; ++s) {
    const double d = std::fmod(std::abs(direction[s] - direction[(s + 1) % segments]), kPi);
    angle[s] = std::min(d, kPi - d);
  }
  AngleStats st;
  for (double a : angle) st.mean += a;
  st.mean /= segments;
  for (double a : angle) st.variance += (a - st.mean) * (a - st.mean);
  st.variance /= segments;
  return st;
}

AngleStats border_fitting(std::span<const Point> contour, int segments) {
  std::vector<Vec2> v;
  v.reserve(contour.size());
  for (const Point p : contour) v.push_back({double(p.x), double(p.y)});
  return border_fitting(std::span<const Vec2>(v), segments);
}

AsymmetryResult asymmetry(const Region& region) {
  if (region.area < 16) throw Error(ErrorKind::InsufficientData, "asymmetry: lesion mask too small");
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const Point p : region.pixels) {
    const double dx = p.x - region.cx, dy = p.y - region.cy;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double scale = sxx + syy;
  AsymmetryResult r;
  r.isotropic = std::abs(sxx - syy) <= 1e-9 * scale && std::abs(sxy) <= 1e-9 * scale;
  r.axis_angle = r.isotropic ? 0.0 : 0.5 * std::atan2(2.0 * sxy, sxx - syy);

  const Box& b = region.bbox;
  BinaryMask local(b.width(), b.height(), 0);
  for (const Point p : region.pixels) local(p.x - b.x0, p.y - b.y0) = 1;
  auto inside = [&](double x, double y) {
    const int ix = static_cast<int>(std::floor(x + 0.5)) - b.x0;
    const int iy = static_cast<int>(std::floor(y + 0.5)) - b.y0;
    return local.in_bounds(ix, iy) && local(ix, iy);
  };
  // Count pixels whose mirror across the line through the centroid with
  // direction (ux, uy) leaves the lesion.
  auto fold = [&](double ux, double uy) {
    long missing = 0;
    for (const Point p : region.pixels) {
      const double dx = p.x - region.cx, dy = p.y - region.cy;
      const double along = dx * ux + dy * uy;
      const double mx = region.cx + 2.0 * along * ux - dx;
      const double my = region.cy + 2.0 * along * uy - dy;
      if (!inside(mx, my)) ++missing;
    }
    return missing;
  };
  const double c = std::cos(r.axis_angle), s = std::sin(r.axis_angle);
  const long ax = fold(c, s);
  const long ay = fold(-s, c);
  r.value = static_cast<double>(ax + ay) / static_cast<double>(region.area);
  return r;
}

GlcmFeatures glcm_features(const ChannelPlane& gray, const BinaryMask& mask, int levels) {
  if (levels < 2) throw Error(ErrorKind::InvalidArgument, "GLCM needs at least two levels");
  auto quant = [&](double v) { return std::clamp(static_cast<int>(std::floor(v * levels / 256.0)), 0, levels - 1); };
  std::vector<double> P(static_cast<std::size_t>(levels) * levels, 0.0);
  long pairs = 0;
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x + 1 < gray.width(); ++x)
      if (mask(x, y) && mask(x + 1, y)) {
        ++P[static_cast<std::size_t>(quant(gray(x, y))) * levels + quant(gray(x + 1, y))];
        ++pairs;
      }
  if (pairs == 0) throw Error(ErrorKind::InsufficientData, "GLCM: no horizontal in-mask pixel pair");
  for (double& p : P) p /= static_cast<double>(pairs);

  GlcmFeatures f;
  double mi = 0.0, mj = 0.0;
  for (int i = 0; i < levels; ++i)
    for (int j = 0; j < levels; ++j) {
      const double p = P[static_cast<std::size_t>(i) * levels + j];
      f.contrast += p * (i - j) * (i - j);
      f.energy += p * p;
      f.homogeneity += p / (1.0 + std::abs(i - j));
      mi += i * p;
      mj += j * p;
    }
  double vi = 0.0, vj = 0.0, cov = 0.0;
  for (int i = 0; i < levels; ++i)
    for (int j = 0; j < levels; ++j) {
      const double p = P[static_cast<std::size_t>(i) * levels + j];
      vi += (i - mi) * (i - mi) * p;
      vj += (j - mj) * (j - mj) * p;
      cov += (i - mi) * (j - mj) * p;
    }
  const double denom = std::sqrt(vi) * std::sqrt(vj);
  f.correlation = denom > 1e-12 ? cov / denom : 0.0;
  return f;
}

BinaryMask canny_edges(const ChannelPlane& gray, const BinaryMask& mask, double sigma) {
  const int w = gray.width(), h = gray.height();
  BinaryMask edges(w, h, 0);
  const ChannelPlane g = gaussian_blur(gray, sigma);
  ChannelPlane mag(w, h, 0.0);
  Grid<std::uint8_t> dir(w, h, 0);
  auto at = [&](int x, int y) { return g(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  double max_mag = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      const double m = std::hypot(gx, gy);
      mag(x, y) = m;
      if (mask(x, y)) max_mag = std::max(max_mag, m);
      // Quantize the gradient direction to 0, 45, 90, 135 degrees.
      double a = std::atan2(gy, gx) * 180.0 / kPi;
      if (a < 0) a += 180.0;
      dir(x, y) = a < 22.5 || a >= 157.5 ? 0 : a < 67.5 ? 1 : a < 112.5 ? 2 : 3;
    }
  if (max_mag <= 1e-9) return edges;

  std::array<long, 256> hist{};
  auto bin = [&](double m) { return std::min(255, static_cast<int>(m / max_mag * 256.0)); };
  for (std::size_t i = 0; i < mag.size(); ++i)
    if (mask[i]) ++hist[bin(mag[i])];
  int level;
  try {
    level = otsu_level(hist);
  } catch (const Error&) {
    return edges;
  }
  const double high = level * max_mag / 256.0;
  const double low = 0.5 * high;

  constexpr int ox[4] = {1, 1, 0, -1};
  constexpr int oy[4] = {0, 1, 1, 1};
  ChannelPlane thin(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = mag(x, y);
      if (m <= 0.0) continue;
      const int d = dir(x, y);
      auto mg = [&](int xx, int yy) { return mag.in_bounds(xx, yy) ? mag(xx, yy) : 0.0; };
      const double before = mg(x - ox[d], y - oy[d]);
      const double after = mg(x + ox[d], y + oy[d]);
      if (m > before && m >= after) thin(x, y) = m;
    }
  std::deque<Point> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (thin(x, y) >= high && thin(x, y) > 0.0) {
        edges(x, y) = 1;
        queue.push_back({x, y});
      }
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx, ny = p.y + dy;
        if (!edges.in_bounds(nx, ny) || edges(nx, ny) || thin(nx, ny) < low || thin(nx, ny) <= 0.0) continue;
        edges(nx, ny) = 1;
        queue.push_back({nx, ny});
      }
  }
  return edges;
}

double edge_density(const ChannelPlane& gray, const BinaryMask& mask) {
  require_area(mask, 16, "edge density");
  const BinaryMask e = canny_edges(gray, mask);
  long count = 0, area = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      ++area;
      if (e[i]) ++count;
    }
  return static_cast<double>(count) / static_cast<double>(area);
}

int lbp_min_rotation(int code) {
  int best = code & 0xFF, cur = code & 0xFF;
  for (int i = 1; i < 8; ++i) {
    cur = ((cur >> 1) | ((cur & 1) << 7)) & 0xFF;
    best = std::min(best, cur);
  }
  return best;
}

namespace {

struct LbpTables {
  std::array<int, 36> classes{};
  std::array<int, 256> class_of{};
};

LbpTables build_lbp_tables() {
  LbpTables t;
  std::set<int> mins;
  for (int c = 0; c < 256; ++c) mins.insert(lbp_min_rotation(c));
  if (mins.size() != 36) throw Error(ErrorKind::Degenerate, "LBP class table");
  std::copy(mins.begin(), mins.end(), t.classes.begin());
  for (int c = 0; c < 256; ++c)
    t.class_of[c] =
        static_cast<int>(std::lower_bound(t.classes.begin(), t.classes.end(), lbp_min_rotation(c)) - t.classes.begin());
  return t;
}

const LbpTables& lbp_tables() {
  static const LbpTables t = build_lbp_tables();
  return t;
}

}  // namespace

const std::array<int, 36>& lbp_classes() { return lbp_tables().classes; }
int lbp_class(int code) { return lbp_tables().class_of[code & 0xFF]; }

std::array<double, 36> lbp_s_histogram(const ChannelPlane& gray, const BinaryMask& mask) {
  require_area(mask, 64, "LBP");
  // Ring order E, SE, S, SW, W, NW, N, NE: a 90 degree rotation is a shift by two.
  constexpr int rx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  constexpr int ry[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  std::array<double, 36> hist{};
  long n = 0;
  for (int y = 1; y + 1 < gray.height(); ++y)
    for (int x = 1; x + 1 < gray.width(); ++x) {
      if (!mask(x, y)) continue;
      const double c = gray(x, y);
      int code = 0;
      for (int k = 0; k < 8; ++k)
        if (gray(x + rx[k], y + ry[k]) >= c) code |= 1 << k;
      hist[lbp_class(code)] += 1.0;
      ++n;
    }
  if (n == 0) throw Error(ErrorKind::InsufficientData, "LBP: no lesion pixel with a full 3x3 neighbourhood");
  for (double& v : hist) v /= static_cast<double>(n);
  return hist;
}

namespace {

template <typename F>
auto guarded(const char* feature, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("feature '") + feature + "': " + e.what());
  }
}

}  // namespace

FeatureVector extract_all(const RasterImage& image, const BinaryMask& lesion, ExtractionFlags* flags) {
  if (lesion.width() != image.width() || lesion.height() != image.height())
    throw Error(ErrorKind::InvalidArgument, "lesion mask does not match the image");
  auto comps = connected_components(lesion, 8);
  if (comps.empty()) throw Error(ErrorKind::InsufficientData, "lesion mask is empty");
  const Region* largest = &comps.front();
  for (const Region& r : comps)
    if (r.area > largest->area) largest = &r;

  // Everything below runs in coordinates local to a margin around the
  // lesion, so results depend only on the lesion's neighbourhood.
  constexpr int kMargin = 8;
  const Box box{std::max(0, largest->bbox.x0 - kMargin), std::max(0, largest->bbox.y0 - kMargin),
                std::min(image.width() - 1, largest->bbox.x1 + kMargin),
                std::min(image.height() - 1, largest->bbox.y1 + kMargin)};
  std::vector<Point> shifted;
  shifted.reserve(largest->pixels.size());
  for (const Point p : largest->pixels) shifted.push_back({p.x - box.x0, p.y - box.y0});
  const Region region = Region::from_pixels(std::move(shifted));
  const RasterImage local = crop(image, box);
  const BinaryMask mask = region_mask(region, local.width(), local.height());
  const LesionChannels ch = make_channels(local);
  const Boundary boundary = trace_boundary(region);

  ExtractionFlags fl;
  fl.boundary_degenerate = boundary.degenerate;
  std::vector<double> v;
  v.reserve(feature_catalog().size());

  for (double x : guarded("color basic", [&] { return color_basic(ch, mask); })) v.push_back(x);
  for (double x : guarded("num bins", [&] { return color_hist_nonzero(ch, mask); })) v.push_back(x);
  const std::array<const ChannelPlane*, 3> ct_planes = {&ch.gray(), &ch.red(), &ch.hue()};
  const std::vector<double> fractions = guarded("color triangle", [&] { return radial_fractions(region, boundary); });
  std::vector<TriangleLayout> layouts;
  for (int pa : kCtParts)
    for (int sp : kCtSubparts) layouts.push_back(guarded("color triangle", [&] {
      return triangle_layout(region, boundary, {pa, sp}, fractions);
    }));
  for (const ChannelPlane* plane : ct_planes) {
    std::size_t li = 0;
    for (int pa : kCtParts)
      for (int sp : kCtSubparts) {
        const TriangleLayout& lay = layouts[li++];
        fl.ct_centroid_outside = fl.ct_centroid_outside || lay.centroid_outside;
        v.push_back(color_triangle_value(*plane, region, lay, {pa, sp}));
      }
  }

  const ShapeFeatures shape = guarded("border shape", [&] { return border_shape(region, boundary); });
  v.insert(v.end(), {shape.compactness, shape.solidity, shape.convexity, shape.distance_variance});
  for (int nt : kFitSegments) {
    const AngleStats st = guarded("border fitting", [&] { return border_fitting(std::span<const Point>(boundary.points), nt); });
    v.push_back(st.mean);
    v.push_back(st.variance);
  }

  const AsymmetryResult asym = guarded("asymmetry", [&] { return asymmetry(region); });
  fl.asymmetry_isotropic = asym.isotropic;
  v.push_back(asym.value);

  for (int levels : {32, 64}) {
    const GlcmFeatures g = guarded("glcm", [&] { return glcm_features(ch.gray(), mask, levels); });
    v.insert(v.end(), {g.contrast, g.energy, g.correlation, g.homogeneity});
  }
  v.push_back(guarded("edge density", [&] { return edge_density(ch.gray(), mask); }));
  for (double x : guarded("lbp", [&] { return lbp_s_histogram(ch.gray(), mask); })) v.push_back(x);

  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw Error(ErrorKind::Degenerate, "feature '" + feature_catalog()[i].name + "' is not finite");
  if (flags) *flags = fl;
  return {std::move(v), "", ""};
}

FeatureVector extract_all(const RasterImage& image, const LesionSegmentation& seg, ExtractionFlags* flags) {
  return extract_all(image, seg.fine, flags);
}

}  // namespace dermscan
