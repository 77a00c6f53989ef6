#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dermscan/image.hpp"
#include "dermscan/skin.hpp"

namespace dermscan {

enum class ColorMode { Uniform, RadialGradient, MultiRegion };
std::string color_mode_name(ColorMode m);
ColorMode parse_color_mode(const std::string& s);

struct Harmonic {
  int k = 1;
  double amplitude = 0.0;
  double phase = 0.0;
};

using Color = std::array<double, 3>;

/// Everything needed to render one synthetic lesion.
struct LesionSpec {
  std::uint64_t seed = 0;  // pixel noise and region layout
  int label = 0;           // 1 = melanoma
  int width = 384;
  int height = 384;
  double cx = 192.0;
  double cy = 192.0;
  double radius = 60.0;
  std::vector<Harmonic> harmonics;
  double skew = 0.0;  // radius multiplier 1 + skew * max(0, cos(theta - skew_angle))
  double skew_angle = 0.0;
  ColorMode color_mode = ColorMode::Uniform;
  std::vector<Color> palette;  // uniform: 1 colour; gradient: centre, rim; multi-region: one per region
  std::vector<std::array<double, 2>> region_seeds;  // multi-region: Voronoi sites relative to the centre
  Color skin{220.0, 180.0, 150.0};
  double noise_sigma = 3.0;
  double illumination = 0.0;  // relative brightness change across the image width
  double illumination_angle = 0.0;

  void validate() const;
};

/// r0 * (1 + sum a_k cos(k theta + phi_k)) * skew factor.
double contour_radius(const LesionSpec& spec, double theta);

struct SynthSample {
  RasterImage image;
  BinaryMask mask;
  int label = 0;
};

SynthSample gen_lesion(const LesionSpec& spec);

struct SynthOptions {
  int image_size = 384;
};

/// Draws a class-conditional spec. Benign: harmonics k <= 3 with a_k <=
/// 0.05, no skew, uniform or radial colour. Melanoma: 3-5 harmonics in
/// 4..12 with a_k in [0.06, 0.3], skew in [0.15, 0.35], 3-6 colour regions.
LesionSpec sample_spec(int label, std::uint64_t seed, const SynthOptions& options = {});

/// Benign specs first, then melanoma; image i uses derive_seed(seed, i).
std::vector<LesionSpec> corpus_specs(int n_benign, int n_melanoma, std::uint64_t seed,
                                     const SynthOptions& options = {});

struct CorpusEntry {
  std::string image;
  std::string mask;
  int label = 0;
  LesionSpec spec;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  std::string preset;
  std::string generator;
  std::vector<CorpusEntry> entries;
};

struct CorpusPreset {
  std::string name;
  int n_benign = 100;
  int n_melanoma = 100;
  SynthOptions options;
};

/// "standard" (100/100) and "paper-shape" (99/55).
CorpusPreset corpus_preset(const std::string& name);

/// Writes images/, masks/ and manifest.jsonl under out_dir. Paths in the
/// manifest are relative to out_dir.
CorpusManifest gen_corpus(int n_benign, int n_melanoma, const std::string& preset, std::uint64_t seed,
                          const std::string& out_dir);

nlohmann::json spec_to_json(const LesionSpec& spec);
LesionSpec spec_from_json(const nlohmann::json& j);

/// JSON Lines: a header record then one record per image.
void write_manifest(const std::string& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::string& path);

/// Skin model trained on the generator's skin tones against uniform RGB.
SkinModel synthetic_skin_model(std::uint64_t seed = 7, int components = 8);

std::string generator_version();

}  // namespace dermscan
