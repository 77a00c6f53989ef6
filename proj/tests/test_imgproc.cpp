#include <doctest.h>

#include <filesystem>
#include <random>

#include "dermscan/imgproc.hpp"
#include "dermscan/png_io.hpp"
#include "dermscan/random.hpp"
#include "shapes.hpp"

using namespace dermscan;

namespace {

RasterImage solid(int w, int h, std::array<std::uint8_t, 3> c) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, c);
  return img;
}

// Exhaustive between-class variance maximizer, first maximum wins.
int otsu_oracle(const std::vector<long>& h) {
  long double total = 0, sum = 0;
  for (int i = 0; i < 256; ++i) total += h[i], sum += (long double)i * h[i];
  int best = -1;
  long double best_v = -1;
  for (int t = 1; t < 256; ++t) {
    long double w0 = 0, s0 = 0;
    for (int i = 0; i < t; ++i) w0 += h[i], s0 += (long double)i * h[i];
    const long double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const long double m0 = s0 / w0, m1 = (sum - s0) / w1;
    const long double v = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (v > best_v * (1 + 1e-15L)) best_v = v, best = t;
  }
  return best;
}

}  // namespace

TEST_CASE("luma and hsv anchors") {
  auto one = [](std::array<std::uint8_t, 3> c) { return solid(8, 8, c); };
  CHECK(to_gray(one({255, 255, 255}))(0, 0) == doctest::Approx(255.0));
  CHECK(to_gray(one({0, 0, 0}))(0, 0) == 0.0);
  CHECK(to_gray(one({255, 0, 0}))(3, 3) == doctest::Approx(76.245).epsilon(1e-12));

  const auto g = to_hsv(one({100, 100, 100}));
  CHECK(g.hue(0, 0) == 0.0);
  CHECK(g.val(0, 0) == 100.0);
  const auto r = to_hsv(one({255, 0, 0}));
  CHECK(r.hue(0, 0) == 0.0);
  CHECK(r.val(0, 0) == 255.0);
  CHECK(to_hsv(one({0, 255, 0})).hue(0, 0) == doctest::Approx(85.0));
}

TEST_CASE("downsample keeps aspect and constants") {
  CHECK(downsample(RasterImage(100, 50), 200) == RasterImage(100, 50));
  const RasterImage big = solid(1024, 512, {12, 200, 77});
  const RasterImage small = downsample(big, 256);
  CHECK(small.width() == 256);
  CHECK(small.height() == 128);
  CHECK(small == solid(256, 128, {12, 200, 77}));
}

TEST_CASE("fill_holes") {
  const BinaryMask square = shapes::rect(20, 20, 5, 5, 14, 14);
  CHECK(fill_holes(square) == square);

  BinaryMask ring = shapes::disk(40, 40, 20, 20, 12);
  const BinaryMask inner = shapes::disk(40, 40, 20, 20, 6);
  for (std::size_t i = 0; i < ring.size(); ++i)
    if (inner[i]) ring[i] = 0;
  CHECK(fill_holes(ring) == shapes::disk(40, 40, 20, 20, 12));

  // U open to the top edge.
  BinaryMask u = shapes::rect(20, 20, 4, 0, 15, 15);
  for (int y = 0; y <= 10; ++y)
    for (int x = 8; x <= 11; ++x) u(x, y) = 0;
  CHECK(fill_holes(u) == u);
}

TEST_CASE("majority filter") {
  BinaryMask full(10, 10, 1);
  CHECK(majority_filter(full, 5) == full);

  BinaryMask dot(10, 10, 0);
  dot(5, 5) = 1;
  CHECK(count_foreground(majority_filter(dot, 3)) == 0);

  BinaryMask d = shapes::disk(20, 20, 10, 10, 8);
  d(10, 10) = 0;
  CHECK(majority_filter(d, 3)(10, 10) == 1);

  // Fixed point: one more pass changes nothing.
  Rng rng(3);
  BinaryMask noisy(40, 30, 0);
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = rng.uniform() < 0.45;
  const BinaryMask f = majority_filter(noisy, 5);
  CHECK(majority_pass(f, 5) == f);
}

TEST_CASE("connected components") {
  CHECK(connected_components(BinaryMask(10, 10, 0)).empty());
  BinaryMask two = shapes::rect(20, 20, 1, 1, 3, 3);
  for (int y = 10; y <= 12; ++y)
    for (int x = 10; x <= 12; ++x) two(x, y) = 1;
  const auto regions = connected_components(two);
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].area == 9);
  CHECK(regions[1].area == 9);

  BinaryMask diag(10, 10, 0);
  for (int i = 0; i < 6; ++i) diag(i, i) = 1;
  CHECK(connected_components(diag, 8).size() == 1);
  CHECK(connected_components(diag, 4).size() == 6);
}

TEST_CASE("boundary trace") {
  const auto sq = trace_boundary(shapes::only_region(shapes::rect(10, 10, 3, 3, 5, 5)));
  CHECK_FALSE(sq.degenerate);
  const std::vector<Point> expect{{3, 3}, {4, 3}, {5, 3}, {5, 4}, {5, 5}, {4, 5}, {3, 5}, {3, 4}};
  CHECK(sq.points == expect);

  BinaryMask one(5, 5, 0);
  one(2, 2) = 1;
  CHECK(trace_boundary(shapes::only_region(one)).degenerate);

  const auto circle = trace_boundary(shapes::only_region(shapes::disk(40, 40, 20, 20, 10)));
  const double len = static_cast<double>(circle.points.size());
  CHECK(len >= 2 * M_PI * 10 * 0.8);
  CHECK(len <= 2 * M_PI * 10 * 1.5);
}

TEST_CASE("otsu level against exhaustive search") {
  std::mt19937 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<long> h(256, 0);
    const int spikes = 2 + gen() % 10;
    for (int s = 0; s < spikes; ++s) h[gen() % 256] += 1 + gen() % 1000;
    if (std::count_if(h.begin(), h.end(), [](long c) { return c > 0; }) < 2) continue;
    CHECK(otsu_level(h) == otsu_oracle(h));
  }
  std::vector<long> bimodal(256, 0);
  bimodal[50] = bimodal[200] = 100;
  const int t = otsu_level(bimodal);
  CHECK(t > 50);
  CHECK(t <= 200);
  std::vector<long> flat(256, 0);
  flat[7] = 10;
  CHECK_THROWS_AS(otsu_level(flat), Error);
}

TEST_CASE("png round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  RasterImage img(9, 11);
  Rng rng(5);
  for (auto& b : img.data()) b = static_cast<std::uint8_t>(rng.below(256));
  write_png((dir / "dermscan_rt.png").string(), img);
  CHECK(read_png((dir / "dermscan_rt.png").string()) == img);
  const BinaryMask m = shapes::disk(12, 10, 6, 5, 3);
  write_mask_png((dir / "dermscan_rt_mask.png").string(), m);
  CHECK(read_mask_png((dir / "dermscan_rt_mask.png").string()) == m);
  CHECK_THROWS_AS(read_png((dir / "no_such_dir" / "x.png").string()), Error);
}
