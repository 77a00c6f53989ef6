#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dermscan/image.hpp"
#include <json.hpp>

namespace dermscan {

using Rgb = std::array<std::uint8_t, 3>;

struct GaussianComponent {
  double weight = 1.0;
  std::array<double, 3> mean{};
  std::array<double, 3> var{1.0, 1.0, 1.0};  // diagonal covariance
  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

struct GaussianMixture {
  std::vector<GaussianComponent> components;

  double log_density(const std::array<double, 3>& x) const;
  friend bool operator==(const GaussianMixture&, const GaussianMixture&) = default;
};

struct MixtureFit {
  GaussianMixture mixture;
  std::vector<double> log_likelihood;  // mean per-sample value after each EM iteration
  bool variance_floored = false;
};

inline constexpr double kVarianceFloor = 1.0;

/// Diagonal-covariance EM with k-means++ seeding. Deterministic in (pixels, K, seed).
MixtureFit fit_mixture(std::span<const Rgb> pixels, int components, std::uint64_t seed, int max_iterations = 200);

struct SkinModel {
  GaussianMixture skin;
  GaussianMixture nonskin;
  double theta = 1.0;  // likelihood-ratio threshold
  bool variance_floored = false;

  /// log p(rgb|skin) - log p(rgb|non-skin)
  double log_ratio(const Rgb& rgb) const;
  void validate() const;
  friend bool operator==(const SkinModel&, const SkinModel&) = default;
};

SkinModel train_skin_model(std::span<const Rgb> skin_pixels, std::span<const Rgb> nonskin_pixels, int components,
                           std::uint64_t seed, double theta = 1.0);

/// Pixels whose likelihood ratio reaches theta, before hole filling.
BinaryMask classify_skin_pixels(const RasterImage& image, const SkinModel& model);

/// Skin mask with every interior hole filled, so a mole inside skin is kept.
BinaryMask detect_skin(const RasterImage& image, const SkinModel& model);

nlohmann::json skin_model_to_json(const SkinModel& model);
SkinModel skin_model_from_json(const nlohmann::json& j);
void save_skin_model(const std::string& path, const SkinModel& model);
SkinModel load_skin_model(const std::string& path);

}  // namespace dermscan
