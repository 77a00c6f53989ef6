#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dermscan/classify.hpp"
#include "dermscan/featsel.hpp"
#include "dermscan/segment.hpp"
#include "dermscan/svm.hpp"

namespace dermscan {

enum class SelectionScope { PerFold, Global };

/// Every tunable knob of the pipeline. JSON form is versioned and strict:
/// unknown keys are rejected at every level.
struct RunConfig {
  std::uint64_t seed = 42;
  SegConfig segmentation;
  int skin_components = 8;
  double skin_theta = 1.0;

  bool selection_enabled = true;
  SelectionParams selection;
  int select_color = 3;
  int select_border = 2;
  int select_texture = 3;
  SelectionScope selection_scope = SelectionScope::PerFold;

  SvmParams svm;
  int knn_k = 2;

  FusionMode fusion = FusionMode::Hierarchical;
  std::vector<FeatureBlock> fusion_members{FeatureBlock::Color, FeatureBlock::Border, FeatureBlock::Asymmetry,
                                           FeatureBlock::GlcmEdge};
  int stacking_folds = 5;

  int cv_folds = 10;

  void validate() const;
};

constexpr int kConfigVersion = 1;

nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

FeatureBlock parse_block(const std::string& s);

std::string tool_version();

}  // namespace dermscan
