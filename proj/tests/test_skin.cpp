#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dermscan/random.hpp"
#include "dermscan/skin.hpp"
#include "shapes.hpp"

using namespace dermscan;

namespace {

std::vector<Rgb> cloud(Rgb centre, int spread, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Rgb> out;
  for (int i = 0; i < n; ++i) {
    Rgb p;
    for (int c = 0; c < 3; ++c)
      p[c] = static_cast<std::uint8_t>(centre[c] - spread + static_cast<int>(rng.below(2 * spread + 1)));
    out.push_back(p);
  }
  return out;
}

std::vector<Rgb> uniform_rgb(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Rgb> out;
  for (int i = 0; i < n; ++i)
    out.push_back({static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                   static_cast<std::uint8_t>(rng.below(256))});
  return out;
}

}  // namespace

TEST_CASE("single component recovers the sample mean") {
  const auto px = cloud({200, 150, 120}, 5, 2000, 1);
  const MixtureFit fit = fit_mixture(px, 1, 9);
  REQUIRE(fit.mixture.components.size() == 1);
  const auto& m = fit.mixture.components[0].mean;
  CHECK(m[0] == doctest::Approx(200).epsilon(0.01));
  CHECK(m[1] == doctest::Approx(150).epsilon(0.014));
  CHECK(m[2] == doctest::Approx(120).epsilon(0.017));
  CHECK(fit_mixture(px, 1, 9).mixture == fit.mixture);
}

TEST_CASE("em log likelihood does not decrease") {
  const auto px = cloud({120, 90, 200}, 30, 1500, 2);
  const MixtureFit fit = fit_mixture(px, 4, 3);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
    CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
  double w = 0.0;
  for (const auto& c : fit.mixture.components) w += c.weight;
  CHECK(w == doctest::Approx(1.0));
}

TEST_CASE("skin detection") {
  const auto skin = cloud({210, 170, 140}, 8, 3000, 4);
  const auto other = uniform_rgb(3000, 5);
  const SkinModel model = train_skin_model(skin, other, 3, 6);
  CHECK(model == train_skin_model(skin, other, 3, 6));

  const BinaryMask none(30, 30, 0);
  const RasterImage all_skin = shapes::compose(none, [](int, int) { return std::array<std::uint8_t, 3>{}; }, {210, 170, 140});
  CHECK(count_foreground(detect_skin(all_skin, model)) == 900);
  const RasterImage all_green = shapes::compose(none, [](int, int) { return std::array<std::uint8_t, 3>{}; }, {10, 240, 20});
  CHECK(count_foreground(detect_skin(all_green, model)) == 0);

  const BinaryMask mole = shapes::disk(30, 30, 15, 15, 5);
  const RasterImage with_mole =
      shapes::compose(mole, [](int, int) { return std::array<std::uint8_t, 3>{40, 25, 20}; }, {210, 170, 140});
  CHECK(count_foreground(classify_skin_pixels(with_mole, model)) < 900);
  CHECK(count_foreground(detect_skin(with_mole, model)) == 900);
}

TEST_CASE("skin model files") {
  const SkinModel model = train_skin_model(cloud({200, 160, 130}, 6, 500, 1), uniform_rgb(500, 2), 2, 3);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string path = (dir / "dermscan_skin.json").string();
  save_skin_model(path, model);
  CHECK(load_skin_model(path) == model);

  auto j = skin_model_to_json(model);
  j["magic"] = "not-a-skin-model";
  CHECK_THROWS_AS(skin_model_from_json(j), Error);

  SkinModel half = model;
  for (auto& c : half.skin.components) c.weight *= 0.5;
  CHECK_THROWS_AS(skin_model_from_json(skin_model_to_json(half)), Error);
}
