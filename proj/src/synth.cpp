#include "dermscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "dermscan/error.hpp"
#include "dermscan/png_io.hpp"
#include "dermscan/random.hpp"

namespace dermscan {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr const char* kManifestMagic = "dermscan-corpus";
constexpr int kManifestVersion = 1;

const Color kLightSkin{236.0, 200.0, 176.0};
const Color kTanSkin{172.0, 120.0, 92.0};

// Per-channel multipliers of the skin tone.
const std::array<Color, 4> kMelanomaPalette = {{
    {0.45, 0.38, 0.35},  // dark brown
    {0.22, 0.20, 0.20},  // near black
    {0.62, 0.45, 0.42},  // red-brown
    {0.45, 0.50, 0.62},  // blue-gray
}};

Color mix(const Color& a, const Color& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

double max_radius(const LesionSpec& s) {
  double r = 0.0;
  for (int i = 0; i < 720; ++i) r = std::max(r, contour_radius(s, 2.0 * kPi * i / 720.0));
  return r;
}

}  // namespace

std::string color_mode_name(ColorMode m) {
  switch (m) {
    case ColorMode::Uniform: return "uniform";
    case ColorMode::RadialGradient: return "radial-gradient";
    case ColorMode::MultiRegion: return "multi-region";
  }
  return "?";
}

ColorMode parse_color_mode(const std::string& s) {
  for (ColorMode m : {ColorMode::Uniform, ColorMode::RadialGradient, ColorMode::MultiRegion})
    if (color_mode_name(m) == s) return m;
  throw Error(ErrorKind::Format, "unknown colour mode '" + s + "'");
}

void LesionSpec::validate() const {
  if (width < 8 || height < 8) throw Error(ErrorKind::InvalidArgument, "synthetic image must be at least 8x8");
  if (!(radius >= 16.0)) throw Error(ErrorKind::InvalidArgument, "lesion radius must be at least 16 px");
  double total = 0.0;
  for (const Harmonic& h : harmonics) {
    if (h.k < 1 || h.k > 12) throw Error(ErrorKind::InvalidArgument, "harmonic order must lie in 1..12");
    if (!(h.amplitude >= 0.0 && h.amplitude <= 0.5))
      throw Error(ErrorKind::InvalidArgument, "harmonic amplitude must lie in [0, 0.5]");
    total += h.amplitude;
  }
  if (total >= 0.95) throw Error(ErrorKind::InvalidArgument, "harmonic amplitudes sum to 0.95 or more");
  if (!(skew >= 0.0 && skew <= 1.0)) throw Error(ErrorKind::InvalidArgument, "skew must lie in [0, 1]");
  if (label != 0 && label != 1) throw Error(ErrorKind::InvalidArgument, "label must be 0 or 1");
  const std::size_t need = color_mode == ColorMode::Uniform ? 1 : color_mode == ColorMode::RadialGradient ? 2 : 1;
  if (palette.size() < need) throw Error(ErrorKind::InvalidArgument, "palette too small for the colour mode");
  if (color_mode == ColorMode::MultiRegion && region_seeds.size() != palette.size())
    throw Error(ErrorKind::InvalidArgument, "multi-region needs one seed per palette colour");
  if (!(noise_sigma >= 0.0) || !(illumination >= 0.0 && illumination < 1.0))
    throw Error(ErrorKind::InvalidArgument, "noise and illumination must be non-negative (illumination < 1)");
}

double contour_radius(const LesionSpec& spec, double theta) {
  double f = 1.0;
  for (const Harmonic& h : spec.harmonics) f += h.amplitude * std::cos(h.k * theta + h.phase);
  return spec.radius * f * (1.0 + spec.skew * std::max(0.0, std::cos(theta - spec.skew_angle)));
}

SynthSample gen_lesion(const LesionSpec& spec) {
  spec.validate();
  SynthSample out{RasterImage(spec.width, spec.height), BinaryMask(spec.width, spec.height, 0), spec.label};
  Rng rng(spec.seed);
  const double ca = std::cos(spec.illumination_angle), sa = std::sin(spec.illumination_angle);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const double dx = x + 0.5 - spec.cx, dy = y + 0.5 - spec.cy;
      const double dist = std::hypot(dx, dy);
      const double edge = contour_radius(spec, std::atan2(dy, dx));
      const bool inside = dist <= edge;
      Color c = spec.skin;
      if (inside) {
        out.mask(x, y) = 1;
        switch (spec.color_mode) {
          case ColorMode::Uniform: c = spec.palette[0]; break;
          case ColorMode::RadialGradient: c = mix(spec.palette[0], spec.palette[1], edge > 0 ? dist / edge : 0.0); break;
          case ColorMode::MultiRegion: {
            // Soft Voronoi: each site's colour fades with distance.
            c = {0.0, 0.0, 0.0};
            double total = 0.0;
            const double s2 = 2.0 * (0.25 * spec.radius) * (0.25 * spec.radius);
            for (std::size_t r = 0; r < spec.region_seeds.size(); ++r) {
              const double ex = dx - spec.region_seeds[r][0] * spec.radius;
              const double ey = dy - spec.region_seeds[r][1] * spec.radius;
              const double w = std::exp(-(ex * ex + ey * ey) / s2) + 1e-12;
              for (int k = 0; k < 3; ++k) c[k] += w * spec.palette[r][k];
              total += w;
            }
            for (double& v : c) v /= total;
            break;
          }
        }
      }
      const double light = 1.0 + spec.illumination * ((x + 0.5 - spec.width / 2.0) * ca + (y + 0.5 - spec.height / 2.0) * sa) /
                                     spec.width;
      std::array<std::uint8_t, 3> px{};
      for (int k = 0; k < 3; ++k)
        px[k] = static_cast<std::uint8_t>(std::clamp(std::lround(c[k] * light + spec.noise_sigma * rng.normal()), 0L, 255L));
      out.image.set(x, y, px);
    }
  return out;
}

LesionSpec sample_spec(int label, std::uint64_t seed, const SynthOptions& options) {
  Rng rng(seed);
  LesionSpec s;
  s.seed = derive_seed(seed, 99);
  s.label = label;
  s.width = s.height = options.image_size;
  const double scale = options.image_size / 384.0;
  s.cx = s.width / 2.0 + rng.uniform(-0.06, 0.06) * s.width;
  s.cy = s.height / 2.0 + rng.uniform(-0.06, 0.06) * s.height;
  s.radius = rng.uniform(45.0, 80.0) * scale;
  s.skin = mix(kLightSkin, kTanSkin, rng.uniform());
  s.noise_sigma = rng.uniform(2.0, 5.0);
  s.illumination = rng.uniform(0.0, 0.15);
  s.illumination_angle = rng.uniform(0.0, 2.0 * kPi);

  if (label == 0) {
    const int n = 1 + static_cast<int>(rng.below(3));
    for (int k = 1; k <= n; ++k) s.harmonics.push_back({k, rng.uniform(0.0, 0.05), rng.uniform(0.0, 2.0 * kPi)});
    const double f = rng.uniform(0.45, 0.65);
    const Color base{s.skin[0] * f, s.skin[1] * f * 0.9, s.skin[2] * f * 0.85};
    if (rng.uniform() < 0.5) {
      s.color_mode = ColorMode::Uniform;
      s.palette = {base};
    } else {
      s.color_mode = ColorMode::RadialGradient;
      const double g = rng.uniform(0.85, 0.95);
      s.palette = {{base[0] * g, base[1] * g, base[2] * g}, base};
    }
  } else {
    const int n = 3 + static_cast<int>(rng.below(3));
    std::vector<int> orders;
    while (static_cast<int>(orders.size()) < n) {
      const int k = 4 + static_cast<int>(rng.below(9));
      if (std::find(orders.begin(), orders.end(), k) == orders.end()) orders.push_back(k);
    }
    std::sort(orders.begin(), orders.end());
    double total = 0.0;
    for (int k : orders) {
      s.harmonics.push_back({k, rng.uniform(0.06, 0.3), rng.uniform(0.0, 2.0 * kPi)});
      total += s.harmonics.back().amplitude;
    }
    if (total > 0.6)
      for (Harmonic& h : s.harmonics) h.amplitude = std::max(0.06, h.amplitude * 0.6 / total);
    s.skew = rng.uniform(0.15, 0.35);
    s.skew_angle = rng.uniform(0.0, 2.0 * kPi);
    s.color_mode = ColorMode::MultiRegion;
    const int regions = 3 + static_cast<int>(rng.below(4));
    for (int r = 0; r < regions; ++r) {
      const Color& f = kMelanomaPalette[r < 4 ? r : rng.below(4)];
      const double jitter = rng.uniform(-0.04, 0.04);
      s.palette.push_back({s.skin[0] * (f[0] + jitter), s.skin[1] * (f[1] + jitter), s.skin[2] * (f[2] + jitter)});
      const double rad = 0.8 * std::sqrt(rng.uniform()), ang = rng.uniform(0.0, 2.0 * kPi);
      s.region_seeds.push_back({rad * std::cos(ang), rad * std::sin(ang)});
    }
  }

  // Keep the lesion well inside the frame.
  const double limit = 0.4 * std::min(s.width, s.height);
  const double reach = max_radius(s);
  if (reach > limit) s.radius = std::max(16.0, s.radius * limit / reach);
  return s;
}

std::vector<LesionSpec> corpus_specs(int n_benign, int n_melanoma, std::uint64_t seed, const SynthOptions& options) {
  if (n_benign < 1 || n_melanoma < 1) throw Error(ErrorKind::InvalidArgument, "corpus needs at least one image per class");
  std::vector<LesionSpec> specs;
  for (int i = 0; i < n_benign + n_melanoma; ++i)
    specs.push_back(sample_spec(i < n_benign ? 0 : 1, derive_seed(seed, static_cast<std::uint64_t>(i)), options));
  return specs;
}

CorpusPreset corpus_preset(const std::string& name) {
  if (name == "standard") return {"standard", 100, 100, {}};
  if (name == "paper-shape") return {"paper-shape", 99, 55, {}};
  throw Error(ErrorKind::InvalidArgument, "unknown preset '" + name + "' (expected standard or paper-shape)");
}

std::string generator_version() { return "dermscan-synth 1"; }

CorpusManifest gen_corpus(int n_benign, int n_melanoma, const std::string& preset, std::uint64_t seed,
                          const std::string& out_dir) {
  const CorpusPreset p = corpus_preset(preset);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + out_dir + "': " + ec.message());

  CorpusManifest m{seed, p.name, generator_version(), {}};
  const auto specs = corpus_specs(n_benign, n_melanoma, seed, p.options);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", i);
    const SynthSample s = gen_lesion(specs[i]);
    CorpusEntry e{std::string("images/") + name, std::string("masks/") + name, s.label, specs[i]};
    write_png((fs::path(out_dir) / e.image).string(), s.image);
    write_mask_png((fs::path(out_dir) / e.mask).string(), s.mask);
    m.entries.push_back(std::move(e));
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), m);
  return m;
}

nlohmann::json spec_to_json(const LesionSpec& s) {
  nlohmann::json h = nlohmann::json::array();
  for (const Harmonic& x : s.harmonics) h.push_back({{"k", x.k}, {"amplitude", x.amplitude}, {"phase", x.phase}});
  return {{"seed", s.seed},
          {"label", s.label},
          {"width", s.width},
          {"height", s.height},
          {"cx", s.cx},
          {"cy", s.cy},
          {"radius", s.radius},
          {"harmonics", h},
          {"skew", s.skew},
          {"skew_angle", s.skew_angle},
          {"color_mode", color_mode_name(s.color_mode)},
          {"palette", s.palette},
          {"region_seeds", s.region_seeds},
          {"skin", s.skin},
          {"noise_sigma", s.noise_sigma},
          {"illumination", s.illumination},
          {"illumination_angle", s.illumination_angle}};
}

LesionSpec spec_from_json(const nlohmann::json& j) {
  try {
    LesionSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.label = j.at("label").get<int>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.cx = j.at("cx").get<double>();
    s.cy = j.at("cy").get<double>();
    s.radius = j.at("radius").get<double>();
    for (const auto& h : j.at("harmonics"))
      s.harmonics.push_back({h.at("k").get<int>(), h.at("amplitude").get<double>(), h.at("phase").get<double>()});
    s.skew = j.at("skew").get<double>();
    s.skew_angle = j.at("skew_angle").get<double>();
    s.color_mode = parse_color_mode(j.at("color_mode").get<std::string>());
    s.palette = j.at("palette").get<std::vector<Color>>();
    s.region_seeds = j.at("region_seeds").get<std::vector<std::array<double, 2>>>();
    s.skin = j.at("skin").get<Color>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.illumination = j.at("illumination").get<double>();
    s.illumination_angle = j.at("illumination_angle").get<double>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed lesion spec: ") + e.what());
  }
}

void write_manifest(const std::string& path, const CorpusManifest& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << nlohmann::json{{"magic", kManifestMagic},
                        {"version", kManifestVersion},
                        {"seed", m.seed},
                        {"preset", m.preset},
                        {"generator", m.generator},
                        {"count", m.entries.size()}}
             .dump()
      << '\n';
  for (const CorpusEntry& e : m.entries)
    out << nlohmann::json{{"image", e.image}, {"mask", e.mask}, {"label", e.label}, {"spec", spec_to_json(e.spec)}}.dump()
        << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  CorpusManifest m;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!header) {
        if (j.value("magic", "") != kManifestMagic) throw Error(ErrorKind::Format, "not a corpus manifest (bad magic)");
        if (j.at("version").get<int>() != kManifestVersion) throw Error(ErrorKind::Format, "unsupported manifest version");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.preset = j.value("preset", "");
        m.generator = j.value("generator", "");
        header = true;
        continue;
      }
      CorpusEntry e;
      e.image = j.at("image").get<std::string>();
      e.mask = j.value("mask", "");
      e.label = j.at("label").get<int>();
      if (e.label != 0 && e.label != 1) throw Error(ErrorKind::Format, "label must be 0 or 1");
      if (j.contains("spec")) e.spec = spec_from_json(j.at("spec"));
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!header) throw Error(ErrorKind::Format, "manifest '" + path + "' is empty");
  return m;
}

SkinModel synthetic_skin_model(std::uint64_t seed, int components) {
  Rng rng(seed);
  constexpr int kSamples = 6000;
  std::vector<Rgb> skin, other;
  for (int i = 0; i < kSamples; ++i) {
    const Color c = mix(kLightSkin, kTanSkin, rng.uniform());
    const double light = rng.uniform(0.88, 1.12);
    Rgb p{};
    for (int k = 0; k < 3; ++k)
      p[k] = static_cast<std::uint8_t>(std::clamp(std::lround(c[k] * light + 6.0 * rng.normal()), 0L, 255L));
    skin.push_back(p);
  }
  for (int i = 0; i < kSamples; ++i)
    other.push_back({static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                     static_cast<std::uint8_t>(rng.below(256))});
  return train_skin_model(skin, other, components, derive_seed(seed, 2), 1.0);
}

}  // namespace dermscan
