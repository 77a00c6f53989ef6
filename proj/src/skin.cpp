#include "dermscan/skin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "dermscan/imgproc.hpp"
#include "dermscan/random.hpp"

namespace dermscan {

namespace {

constexpr const char* kMagic = "dermscan-skin-model";
constexpr int kVersion = 1;

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double component_log_density(const GaussianComponent& c, const std::array<double, 3>& x) {
  double acc = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = x[k] - c.mean[k];
    acc += std::log(2.0 * std::numbers::pi * c.var[k]) + d * d / c.var[k];
  }
  return -0.5 * acc;
}

std::array<double, 3> to_vec(const Rgb& p) { return {double(p[0]), double(p[1]), double(p[2])}; }

}  // namespace

double GaussianMixture::log_density(const std::array<double, 3>& x) const {
  // Streaming log-sum-exp.
  double mx = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& c : components) {
    if (c.weight <= 0.0) continue;
    const double t = std::log(c.weight) + component_log_density(c, x);
    if (t > mx) {
      sum = sum * std::exp(mx - t) + 1.0;
      mx = t;
    } else {
      sum += std::exp(t - mx);
    }
  }
  return std::isfinite(mx) ? mx + std::log(sum) : mx;
}

MixtureFit fit_mixture(std::span<const Rgb> pixels, int components, std::uint64_t seed, int max_iterations) {
  if (components < 1) throw Error(ErrorKind::InvalidArgument, "mixture needs K >= 1");
  const std::size_t n = pixels.size();
  if (n < 100 * static_cast<std::size_t>(components))
    throw Error(ErrorKind::InsufficientData, "mixture fit needs at least 100*K samples");
  const auto K = static_cast<std::size_t>(components);

  std::vector<std::array<double, 3>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = to_vec(pixels[i]);

  MixtureFit fit;
  std::array<double, 3> gmean{}, gvar{};
  for (const auto& v : x)
    for (int k = 0; k < 3; ++k) gmean[k] += v[k];
  for (double& m : gmean) m /= static_cast<double>(n);
  for (const auto& v : x)
    for (int k = 0; k < 3; ++k) gvar[k] += (v[k] - gmean[k]) * (v[k] - gmean[k]);
  for (double& s : gvar) s = std::max(kVarianceFloor, s / static_cast<double>(n));

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<std::array<double, 3>> centers;
  centers.push_back(x[rng.below(n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += (x[i][k] - centers.back()[k]) * (x[i][k] - centers.back()[k]);
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.below(n);
    } else {
      double target = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    }
    centers.push_back(x[pick]);
  }

  auto& comps = fit.mixture.components;
  comps.resize(K);
  for (std::size_t c = 0; c < K; ++c) comps[c] = {1.0 / static_cast<double>(K), centers[c], gvar};

  std::vector<double> resp(n * K);
  std::vector<double> logp(K);
  for (int iter = 0; iter < max_iterations; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < K; ++c)
        logp[c] = comps[c].weight > 0.0 ? std::log(comps[c].weight) + component_log_density(comps[c], x[i])
                                        : -std::numeric_limits<double>::infinity();
      const double lse = log_sum_exp(logp);
      ll += lse;
      for (std::size_t c = 0; c < K; ++c) resp[i * K + c] = std::exp(logp[c] - lse);
    }
    ll /= static_cast<double>(n);
    const bool converged =
        !fit.log_likelihood.empty() && ll - fit.log_likelihood.back() < 1e-10 * std::max(1.0, std::abs(ll));
    fit.log_likelihood.push_back(ll);
    if (converged) break;

    for (std::size_t c = 0; c < K; ++c) {
      double nk = 0.0;
      std::array<double, 3> mean{};
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * K + c];
        nk += r;
        for (int k = 0; k < 3; ++k) mean[k] += r * x[i][k];
      }
      if (nk <= 0.0) {
        comps[c].weight = 0.0;
        continue;
      }
      for (double& m : mean) m /= nk;
      std::array<double, 3> var{};
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * K + c];
        for (int k = 0; k < 3; ++k) var[k] += r * (x[i][k] - mean[k]) * (x[i][k] - mean[k]);
      }
      for (double& v : var) {
        v /= nk;
        if (v < kVarianceFloor) {
          v = kVarianceFloor;
          fit.variance_floored = true;
        }
      }
      comps[c] = {nk / static_cast<double>(n), mean, var};
    }
  }
  return fit;
}

double SkinModel::log_ratio(const Rgb& rgb) const {
  const auto v = to_vec(rgb);
  return skin.log_density(v) - nonskin.log_density(v);
}

void SkinModel::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw Error(ErrorKind::Format, "skin threshold must be positive");
  for (const GaussianMixture* m : {&skin, &nonskin}) {
    if (m->components.empty()) throw Error(ErrorKind::Format, "mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : m->components) {
      if (c.weight < 0.0) throw Error(ErrorKind::Format, "negative mixture weight");
      total += c.weight;
      for (double v : c.var)
        if (!(v > 0.0)) throw Error(ErrorKind::Format, "covariance entries must be positive");
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::Format, "mixture weights must sum to 1");
  }
}

SkinModel train_skin_model(std::span<const Rgb> skin_pixels, std::span<const Rgb> nonskin_pixels, int components,
                           std::uint64_t seed, double theta) {
  const MixtureFit s = fit_mixture(skin_pixels, components, seed);
  const MixtureFit ns = fit_mixture(nonskin_pixels, components, derive_seed(seed, 1));
  SkinModel m{s.mixture, ns.mixture, theta, s.variance_floored || ns.variance_floored};
  m.validate();
  return m;
}

namespace {

// Mixture with the per-component constants folded in.
struct CompiledMixture {
  struct Term {
    double offset;  // log w - 1/2 sum log(2 pi var)
    std::array<double, 3> mean;
    std::array<double, 3> half_inv;  // 1 / (2 var)
  };
  std::vector<Term> terms;

  explicit CompiledMixture(const GaussianMixture& m) {
    for (const auto& c : m.components) {
      if (c.weight <= 0.0) continue;
      Term t{std::log(c.weight), c.mean, {}};
      for (int k = 0; k < 3; ++k) {
        t.offset -= 0.5 * std::log(2.0 * std::numbers::pi * c.var[k]);
        t.half_inv[k] = 0.5 / c.var[k];
      }
      terms.push_back(t);
    }
  }

  double log_density(const std::array<double, 3>& x) const {
    double v[64];
    double mx = -std::numeric_limits<double>::infinity();
    const std::size_t n = std::min<std::size_t>(terms.size(), 64);
    for (std::size_t i = 0; i < n; ++i) {
      const Term& t = terms[i];
      double acc = t.offset;
      for (int k = 0; k < 3; ++k) acc -= (x[k] - t.mean[k]) * (x[k] - t.mean[k]) * t.half_inv[k];
      v[i] = acc;
      mx = std::max(mx, acc);
    }
    if (!std::isfinite(mx)) return mx;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(v[i] - mx);
    return mx + std::log(sum);
  }
};

}  // namespace

BinaryMask classify_skin_pixels(const RasterImage& image, const SkinModel& model) {
  BinaryMask out(image.width(), image.height(), 0);
  const double log_theta = std::log(model.theta);
  const bool compiled_ok = model.skin.components.size() <= 64 && model.nonskin.components.size() <= 64;
  const CompiledMixture skin(model.skin), nonskin(model.nonskin);
  // 0 = not yet seen, 1 = non-skin, 2 = skin; indexed by packed RGB.
  std::vector<std::uint8_t> memo(std::size_t{1} << 24, 0);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const Rgb p = image.at(x, y);
      std::uint8_t& m = memo[(std::size_t{p[0]} << 16) | (std::size_t{p[1]} << 8) | p[2]];
      if (m == 0) {
        const auto v = to_vec(p);
        const double r = compiled_ok ? skin.log_density(v) - nonskin.log_density(v) : model.log_ratio(p);
        m = r >= log_theta ? 2 : 1;
      }
      out(x, y) = m == 2 ? 1 : 0;
    }
  return out;
}

BinaryMask detect_skin(const RasterImage& image, const SkinModel& model) {
  return fill_holes(classify_skin_pixels(image, model));
}

namespace {

nlohmann::json mixture_to_json(const GaussianMixture& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : m.components) arr.push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
  return arr;
}

GaussianMixture mixture_from_json(const nlohmann::json& arr, std::size_t expected) {
  if (!arr.is_array() || arr.size() != expected)
    throw Error(ErrorKind::Format, "component count does not match K");
  GaussianMixture m;
  for (const auto& c : arr)
    m.components.push_back({c.at("weight").get<double>(), c.at("mean").get<std::array<double, 3>>(),
                            c.at("var").get<std::array<double, 3>>()});
  return m;
}

}  // namespace

nlohmann::json skin_model_to_json(const SkinModel& model) {
  return {{"magic", kMagic},
          {"version", kVersion},
          {"K", model.skin.components.size()},
          {"theta", model.theta},
          {"variance_floored", model.variance_floored},
          {"skin", mixture_to_json(model.skin)},
          {"nonskin", mixture_to_json(model.nonskin)}};
}

SkinModel skin_model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("magic", "") != kMagic) throw Error(ErrorKind::Format, "not a skin model (bad magic)");
    if (j.at("version").get<int>() != kVersion) throw Error(ErrorKind::Format, "unsupported skin model version");
    const auto k = j.at("K").get<std::size_t>();
    if (k < 1) throw Error(ErrorKind::Format, "K must be at least 1");
    SkinModel m;
    m.theta = j.at("theta").get<double>();
    m.variance_floored = j.value("variance_floored", false);
    m.skin = mixture_from_json(j.at("skin"), k);
    m.nonskin = mixture_from_json(j.at("nonskin"), k);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed skin model: ") + e.what());
  }
}

void save_skin_model(const std::string& path, const SkinModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << skin_model_to_json(model).dump(2) << '\n';
}

SkinModel load_skin_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed skin model: ") + e.what());
  }
  return skin_model_from_json(j);
}

}  // namespace dermscan
