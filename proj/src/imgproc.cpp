#include "dermscan/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace dermscan {

std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

RasterImage::RasterImage(int width, int height)
    : RasterImage(width, height, std::vector<std::uint8_t>(3 * static_cast<std::size_t>(std::max(width, 0)) *
                                                           static_cast<std::size_t>(std::max(height, 0)))) {}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), rgb_(std::move(rgb)) {
  if (width < kMinSide || height < kMinSide)
    throw Error(ErrorKind::InvalidArgument, "image must be at least 8x8 pixels");
  if (rgb_.size() != 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw Error(ErrorKind::InvalidArgument, "sample count must equal width*height*3");
}

Region Region::from_pixels(std::vector<Point> pixels) {
  if (pixels.empty()) throw Error(ErrorKind::InvalidArgument, "region needs at least one pixel");
  std::sort(pixels.begin(), pixels.end(), [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  Region r;
  r.area = static_cast<long>(pixels.size());
  r.bbox = {pixels.front().x, pixels.front().y, pixels.front().x, pixels.front().y};
  long sx = 0, sy = 0;
  for (const Point p : pixels) {
    sx += p.x;
    sy += p.y;
    r.bbox.x0 = std::min(r.bbox.x0, p.x);
    r.bbox.x1 = std::max(r.bbox.x1, p.x);
    r.bbox.y0 = std::min(r.bbox.y0, p.y);
    r.bbox.y1 = std::max(r.bbox.y1, p.y);
  }
  r.cx = static_cast<double>(sx) / r.area;
  r.cy = static_cast<double>(sy) / r.area;
  r.pixels = std::move(pixels);
  return r;
}

BinaryMask region_mask(const Region& region, int width, int height) {
  BinaryMask m(width, height, 0);
  for (const Point p : region.pixels)
    if (m.in_bounds(p.x, p.y)) m(p.x, p.y) = 1;
  return m;
}

ChannelPlane to_gray(const RasterImage& image) {
  ChannelPlane g(image.width(), image.height());
  const auto rgb = image.data();
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
  return g;
}

HsvPlanes to_hsv(const RasterImage& image) {
  HsvPlanes out{ChannelPlane(image.width(), image.height()), ChannelPlane(image.width(), image.height()),
                ChannelPlane(image.width(), image.height())};
  const auto rgb = image.data();
  for (std::size_t i = 0; i < out.hue.size(); ++i) {
    const double r = rgb[3 * i], g = rgb[3 * i + 1], b = rgb[3 * i + 2];
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double chroma = mx - mn;
    double h = 0.0;  // degrees
    if (chroma > 0.0) {
      if (mx == r)
        h = 60.0 * std::fmod((g - b) / chroma + 6.0, 6.0);
      else if (mx == g)
        h = 60.0 * ((b - r) / chroma + 2.0);
      else
        h = 60.0 * ((r - g) / chroma + 4.0);
    }
    out.hue[i] = h * 255.0 / 360.0;
    out.sat[i] = mx > 0.0 ? 255.0 * chroma / mx : 0.0;
    out.val[i] = mx;
  }
  return out;
}

ChannelPlane channel(const RasterImage& image, int index) {
  if (index < 0 || index > 2) throw Error(ErrorKind::InvalidArgument, "channel index must be 0, 1 or 2");
  ChannelPlane p(image.width(), image.height());
  const auto rgb = image.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = rgb[3 * i + index];
  return p;
}

namespace {

struct FloatImage {
  int width;
  int height;
  std::vector<double> v;  // interleaved RGB
};

FloatImage decimate(const RasterImage& image, int factor) {
  const int w = (image.width() + factor - 1) / factor;
  const int h = (image.height() + factor - 1) / factor;
  FloatImage out{w, h, std::vector<double>(3 * static_cast<std::size_t>(w) * h, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      int n = 0;
      for (int yy = y * factor; yy < std::min(image.height(), (y + 1) * factor); ++yy)
        for (int xx = x * factor; xx < std::min(image.width(), (x + 1) * factor); ++xx) {
          const auto c = image.at(xx, yy);
          for (int k = 0; k < 3; ++k) acc[k] += c[k];
          ++n;
        }
      for (int k = 0; k < 3; ++k) out.v[3 * (static_cast<std::size_t>(y) * w + x) + k] = acc[k] / n;
    }
  }
  return out;
}

}  // namespace

RasterImage downsample(const RasterImage& image, int max_dim) {
  if (max_dim < 32) throw Error(ErrorKind::InvalidArgument, "max_dim must be at least 32");
  const int longest = std::max(image.width(), image.height());
  if (longest <= max_dim) return image;

  const double scale = static_cast<double>(max_dim) / longest;
  const int tw = image.width() >= image.height() ? max_dim
                                                 : std::max(1, static_cast<int>(std::lround(image.width() * scale)));
  const int th = image.height() > image.width() ? max_dim
                                                : std::max(1, static_cast<int>(std::lround(image.height() * scale)));

  const int factor = std::max(1, static_cast<int>(std::floor(1.0 / scale)));
  FloatImage src = decimate(image, factor);

  std::vector<std::uint8_t> out(3 * static_cast<std::size_t>(tw) * th);
  const double fx = static_cast<double>(src.width) / tw;
  const double fy = static_cast<double>(src.height) / th;
  for (int y = 0; y < th; ++y) {
    const double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = sy - y0;
    for (int x = 0; x < tw; ++x) {
      const double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = sx - x0;
      for (int k = 0; k < 3; ++k) {
        auto s = [&](int xx, int yy) { return src.v[3 * (static_cast<std::size_t>(yy) * src.width + xx) + k]; };
        const double top = s(x0, y0) * (1 - wx) + s(x1, y0) * wx;
        const double bot = s(x0, y1) * (1 - wx) + s(x1, y1) * wx;
        const double v = top * (1 - wy) + bot * wy;
        out[3 * (static_cast<std::size_t>(y) * tw + x) + k] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return RasterImage(tw, th, std::move(out));
}

BinaryMask resize_nearest(const BinaryMask& mask, int width, int height) {
  BinaryMask out(width, height, 0);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / width));
      out(x, y) = mask(sx, sy);
    }
  }
  return out;
}

namespace {

void check_box(const Box& box, int w, int h) {
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= w || box.y1 >= h || box.x1 < box.x0 || box.y1 < box.y0)
    throw Error(ErrorKind::InvalidArgument, "crop box outside image");
}

template <typename T>
Grid<T> crop_grid(const Grid<T>& g, const Box& box) {
  check_box(box, g.width(), g.height());
  Grid<T> out(box.width(), box.height());
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x) out(x, y) = g(box.x0 + x, box.y0 + y);
  return out;
}

}  // namespace

RasterImage crop(const RasterImage& image, const Box& box) {
  check_box(box, image.width(), image.height());
  RasterImage out(box.width(), box.height());
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x) out.set(x, y, image.at(box.x0 + x, box.y0 + y));
  return out;
}

ChannelPlane crop(const ChannelPlane& plane, const Box& box) { return crop_grid(plane, box); }
BinaryMask crop(const BinaryMask& mask, const Box& box) { return crop_grid(mask, box); }

ChannelPlane gaussian_blur(const ChannelPlane& plane, double sigma) {
  if (sigma <= 0.0) return plane;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& k : kernel) k /= total;

  const int w = plane.width(), h = plane.height();
  ChannelPlane tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * plane(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = acc;
    }
  return out;
}

BinaryMask fill_holes(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  BinaryMask outside(w, h, 0);
  std::deque<Point> queue;
  auto seed = [&](int x, int y) {
    if (!mask(x, y) && !outside(x, y)) {
      outside(x, y) = 1;
      queue.push_back({x, y});
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = p.x + dx[k], ny = p.y + dy[k];
      if (mask.in_bounds(nx, ny)) seed(nx, ny);
    }
  }
  BinaryMask out(w, h, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = outside[i] ? 0 : 1;
  return out;
}

BinaryMask majority_pass(const BinaryMask& mask, int window) {
  if (window < 3 || window % 2 == 0) throw Error(ErrorKind::InvalidArgument, "majority window must be odd and >= 3");
  const int w = mask.width(), h = mask.height();
  const int r = window / 2;
  // Summed-area table with a zero first row/column.
  std::vector<long> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto S = [&](int x, int y) -> long& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) S(x + 1, y + 1) = (mask(x, y) ? 1 : 0) + S(x, y + 1) + S(x + 1, y) - S(x, y);

  BinaryMask out(w, h, 0);
  for (int y = 0; y < h; ++y) {
    const int ya = std::max(0, y - r), yb = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int xa = std::max(0, x - r), xb = std::min(w - 1, x + r);
      const long n = static_cast<long>(xb - xa + 1) * (yb - ya + 1);
      const long fg = S(xb + 1, yb + 1) - S(xa, yb + 1) - S(xb + 1, ya) + S(xa, ya);
      if (2 * fg > n)
        out(x, y) = 1;
      else if (2 * fg < n)
        out(x, y) = 0;
      else
        out(x, y) = mask(x, y) ? 1 : 0;
    }
  }
  return out;
}

BinaryMask majority_filter(const BinaryMask& mask, int window) {
  constexpr int kMaxPasses = 64;
  BinaryMask cur = majority_pass(mask, window);
  for (int i = 1; i < kMaxPasses; ++i) {
    BinaryMask next = majority_pass(cur, window);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

std::vector<Region> connected_components(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) throw Error(ErrorKind::InvalidArgument, "connectivity must be 4 or 8");
  const int w = mask.width(), h = mask.height();
  Grid<std::uint8_t> seen(w, h, 0);
  std::vector<Region> regions;
  std::vector<Point> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y) || seen(x, y)) continue;
      std::vector<Point> pixels;
      stack.push_back({x, y});
      seen(x, y) = 1;
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        pixels.push_back(p);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || (connectivity == 4 && dx != 0 && dy != 0)) continue;
            const int nx = p.x + dx, ny = p.y + dy;
            if (mask.in_bounds(nx, ny) && mask(nx, ny) && !seen(nx, ny)) {
              seen(nx, ny) = 1;
              stack.push_back({nx, ny});
            }
          }
      }
      regions.push_back(Region::from_pixels(std::move(pixels)));
    }
  }
  return regions;
}

BinaryMask largest_component(const BinaryMask& mask) {
  const auto regions = connected_components(mask, 8);
  BinaryMask out(mask.width(), mask.height(), 0);
  if (regions.empty()) return out;
  const Region* best = &regions.front();
  for (const Region& r : regions)
    if (r.area > best->area) best = &r;
  return region_mask(*best, mask.width(), mask.height());
}

namespace {

// Clockwise on screen (y grows downward), starting west.
constexpr int kDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  return -1;
}

}  // namespace

Boundary trace_boundary(const Region& region) {
  if (region.pixels.empty()) throw Error(ErrorKind::InvalidArgument, "cannot trace an empty region");
  // Local mask with a one-pixel background margin.
  const Box& b = region.bbox;
  const int w = b.width() + 2, h = b.height() + 2;
  BinaryMask local(w, h, 0);
  for (const Point p : region.pixels) local(p.x - b.x0 + 1, p.y - b.y0 + 1) = 1;
  auto fg = [&](int x, int y) { return local.in_bounds(x, y) && local(x, y) != 0; };

  Point first = region.pixels.front();
  for (const Point p : region.pixels)
    if (p.x < first.x || (p.x == first.x && p.y < first.y)) first = p;
  const Point start{first.x - b.x0 + 1, first.y - b.y0 + 1};

  Boundary out;
  Point cur = start;
  int back = 0;  // west of the left-most pixel is background
  Point second{-1, -1};
  const std::size_t cap = 4 * static_cast<std::size_t>(region.area) + 16;
  for (std::size_t step = 0; step < cap; ++step) {
    int found = -1;
    for (int i = 1; i <= 8; ++i) {
      const int d = (back + i) % 8;
      if (fg(cur.x + kDx[d], cur.y + kDy[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) {  // isolated pixel
      out.points.push_back(cur);
      break;
    }
    const Point next{cur.x + kDx[found], cur.y + kDy[found]};
    if (step == 0) {
      second = next;
    } else if (cur == start && next == second) {
      break;
    }
    out.points.push_back(cur);
    const int prev = (found + 7) % 8;
    const Point bg{cur.x + kDx[prev], cur.y + kDy[prev]};
    back = direction_of(bg.x - next.x, bg.y - next.y);
    cur = next;
  }
  for (Point& p : out.points) p = {p.x + b.x0 - 1, p.y + b.y0 - 1};

  out.degenerate = region.area < 4;
  if (!out.degenerate) {
    std::vector<Point> sorted = out.points;
    std::sort(sorted.begin(), sorted.end(), [](Point a, Point c) { return a.y != c.y ? a.y < c.y : a.x < c.x; });
    out.degenerate = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  }
  return out;
}

int otsu_level(std::span<const long> histogram) {
  const int n = static_cast<int>(histogram.size());
  long long total = 0, sum = 0;
  int nonempty = 0;
  for (int i = 0; i < n; ++i) {
    total += histogram[i];
    sum += static_cast<long long>(i) * histogram[i];
    if (histogram[i] > 0) ++nonempty;
  }
  if (nonempty < 2) throw Error(ErrorKind::Degenerate, "histogram needs at least two distinct levels");

  // N^2 times the between-class variance: (N*S0 - N0*S)^2 / (N0*N1).
  long long n0 = 0, s0 = 0;
  double best = -1.0;
  int best_t = 1;
  for (int t = 1; t < n; ++t) {
    n0 += histogram[t - 1];
    s0 += static_cast<long long>(t - 1) * histogram[t - 1];
    const long long n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const double diff = static_cast<double>(total * s0 - n0 * sum);
    const double score = diff * diff / (static_cast<double>(n0) * static_cast<double>(n1));
    if (score > best) {
      best = score;
      best_t = t;
    }
  }
  return best_t;
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::InvalidArgument, "mask dimensions differ");
  BinaryMask out(a.width(), a.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

}  // namespace dermscan
