#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dermscan/classify.hpp"
#include "dermscan/config.hpp"
#include "dermscan/eval.hpp"
#include "dermscan/features.hpp"
#include "dermscan/segment.hpp"
#include "dermscan/skin.hpp"

namespace dermscan {

struct ImageAnalysis {
  BinaryMask skin;
  LesionSegmentation segmentation;
  FeatureVector features;
  ExtractionFlags flags;
};

/// Skin detection, two-stage segmentation and the full feature catalog.
ImageAnalysis analyze_image(const RasterImage& image, const SkinModel& skin, const SegConfig& seg);

/// Runs `work(i)` for i in [0, n) on `jobs` threads (0: hardware threads).
/// Exceptions are rethrown for the lowest failing index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& work);

/// Selected catalog indices per block, in selection order.
struct BlockSelection {
  FeatureBlock block = FeatureBlock::Color;
  std::vector<std::size_t> features;
  std::vector<double> scores;
};

/// Selection for color, border and GLCM+edge (asymmetry and LBP pass
/// through whole). Disabled selection keeps the first `count` features.
std::vector<BlockSelection> select_blocks(const FeatureMatrix& x, std::span<const int> labels, const RunConfig& cfg);

struct TrainedModel {
  std::string tool;
  nlohmann::json config;
  std::optional<SkinModel> skin;
  std::vector<std::string> catalog;
  std::vector<CategoryClassifier> members;  // color, border, asymmetry, glcm_edge, lbp
  std::vector<FeatureBlock> fusion_members;
  FusionModel fusion;

  const CategoryClassifier& member(FeatureBlock b) const;
};

/// Trains every member classifier and the configured fusion. When
/// `selection` is given it replaces per-call feature selection.
TrainedModel train_model(const FeatureMatrix& x, std::span<const int> labels, const RunConfig& cfg,
                         const std::vector<BlockSelection>* selection = nullptr);

struct Verdict {
  std::vector<std::pair<FeatureBlock, double>> member_soft;  // every member
  double fused_soft = 0.0;
  int fused_hard = 0;
};

Verdict classify_lesion(const TrainedModel& model, std::span<const double> features);

nlohmann::json model_to_json(const TrainedModel& m);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const TrainedModel& m);
TrainedModel load_model(const std::string& path);

/// Cross-validation of train_model on precomputed feature rows.
CvResult cross_validate_features(const FeatureMatrix& x, std::span<const int> labels, const RunConfig& cfg);

}  // namespace dermscan
