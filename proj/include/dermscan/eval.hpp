#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace dermscan {

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

/// Ratios with a zero denominator are absent.
struct Metrics {
  Confusion counts;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> balanced_accuracy;
  std::optional<double> total_accuracy;
  std::optional<double> ppv;
  std::optional<double> npv;
};

Metrics confusion_metrics(std::span<const int> predicted, std::span<const int> truth);

struct RocPoint {
  double threshold = 0.0;  // predict positive when score >= threshold
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct Roc {
  std::vector<RocPoint> points;  // sorted by increasing specificity
  double auc = 0.0;
};

/// Sweeps every distinct score plus +inf; AUC by the trapezoid rule.
Roc roc_auc(std::span<const double> scores, std::span<const int> truth);

/// Largest sensitivity among points with specificity >= s.
double sens_at_spec(const Roc& roc, double s);

/// Fold index per sample. Each class is shuffled and dealt round-robin,
/// continuing from where the previous class stopped.
std::vector<int> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

struct FoldOutput {
  std::vector<double> soft;  // aligned with the test indices
  std::vector<int> hard;
};

using FoldRunner =
    std::function<FoldOutput(int fold, const std::vector<std::size_t>& train, const std::vector<std::size_t>& test)>;

struct FoldRecord {
  int fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::optional<Metrics> metrics;
  std::optional<double> auc;
  std::string error;  // non-empty when the fold failed
};

struct CvResult {
  std::vector<FoldRecord> folds;
  std::vector<int> fold_of;
  std::vector<double> soft;   // pooled, per sample; NaN for failed folds
  std::vector<int> hard;      // -1 for failed folds
  Metrics pooled;
  std::optional<Roc> roc;
  std::optional<double> sens_at_spec90;
  std::optional<double> mean_fold_balanced_accuracy;
};

/// Runs `runner` on every fold; a throwing fold is recorded and skipped.
CvResult cross_validate(std::span<const int> labels, int k, std::uint64_t seed, const FoldRunner& runner);

nlohmann::json metrics_to_json(const Metrics& m);
nlohmann::json cv_to_json(const CvResult& r);

}  // namespace dermscan
