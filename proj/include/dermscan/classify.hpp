#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dermscan/features.hpp"
#include "dermscan/svm.hpp"

namespace dermscan {

/// 1 - cosine similarity; 1 when either vector is zero.
double cosine_distance(std::span<const double> a, std::span<const double> b);

struct KnnModel {
  FeatureMatrix store;
  std::vector<int> labels;
  int k = 2;

  /// k = 2: both neighbours MM -> 1, both benign -> 0, mixed ->
  /// d_b / (d_m + d_b). Other k: fraction of MM neighbours.
  double soft(std::span<const double> h) const;
  int hard(std::span<const double> h) const { return soft(h) >= 0.5 ? 1 : 0; }
};

KnnModel train_knn(const FeatureMatrix& x, std::span<const int> labels, int k = 2);

/// Logical OR of four hard decisions.
int fuse_sum(std::span<const int> hard);

enum class FusionMode { Sum, WeightedSens, WeightedAuc, Hierarchical };
std::string fusion_mode_name(FusionMode m);
FusionMode parse_fusion_mode(const std::string& s);

struct FusionModel {
  FusionMode mode = FusionMode::Hierarchical;
  std::vector<double> weights;  // weighted modes
  double threshold = 0.5;       // weighted modes: on the weighted hard sum
  std::optional<SvmModel> inner;

  /// Fused confidence in [0,1]: the vote fraction for sum, weighted sum over
  /// total weight for weighted modes, calibrated inner SVM otherwise.
  double soft(std::span<const double> member_soft) const;
  int hard(std::span<const double> member_soft) const;
};

FusionModel make_sum_fusion(std::size_t members);

/// Weights from each member's validation ROC (max sensitivity at
/// specificity >= 0.5, or AUC); the threshold is the smallest achievable
/// positive weighted sum maximizing validation balanced accuracy.
FusionModel fit_weighted_fusion(const FeatureMatrix& val_soft, std::span<const int> labels, FusionMode mode);

FusionModel train_hierarchical(const FeatureMatrix& train_soft, std::span<const int> labels, const SvmParams& params);

/// One category classifier over a fixed list of catalog features.
struct CategoryClassifier {
  FeatureBlock block = FeatureBlock::Color;
  std::vector<std::size_t> features;  // catalog indices, selection order
  std::optional<SvmModel> svm;
  std::optional<KnnModel> knn;

  std::vector<double> project(std::span<const double> full) const;
  double soft(std::span<const double> full) const;
};

nlohmann::json knn_to_json(const KnnModel& m);
KnnModel knn_from_json(const nlohmann::json& j);
nlohmann::json fusion_to_json(const FusionModel& m);
FusionModel fusion_from_json(const nlohmann::json& j);

}  // namespace dermscan
