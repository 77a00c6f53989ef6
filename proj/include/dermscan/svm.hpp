#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "dermscan/features.hpp"

namespace dermscan {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // population std; 1 for constant columns

  static Standardizer fit(const FeatureMatrix& x);
  std::vector<double> apply(std::span<const double> row) const;
};

/// Dual of the box-constrained soft-margin SVM with labels in {-1, +1}:
/// min 1/2 a'Qa - e'a, 0 <= a_i <= box_i, y'a = 0, Q_ij = y_i y_j K_ij.
struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;  // decision = sum a_i y_i K(x_i, x) + bias
  long iterations = 0;
};

/// Second-order working-set SMO on a precomputed n x n Gram matrix (row
/// major). Stops when the maximal KKT violation drops below `tolerance`.
DualSolution solve_dual(std::span<const double> gram, std::span<const int> y, std::span<const double> box,
                        double tolerance = 1e-3, long max_iterations = 10'000'000);

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

struct SvmParams {
  double c = 1.0;
  double gamma = 0.0;      // <= 0: 1 / feature count
  double mm_weight = 1.5;  // box for label 1 is c * mm_weight
  double tolerance = 1e-3;
  bool calibrate = true;
  int calibration_folds = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SvmModel {
  Standardizer standardizer;
  double gamma = 0.0;
  double c_mm = 1.5;
  double c_benign = 1.0;
  std::vector<std::vector<double>> support;  // standardized
  std::vector<double> coef;                  // alpha_i * y_i
  double bias = 0.0;
  // soft = 1 / (1 + exp(sigmoid_a * d + sigmoid_b))
  double sigmoid_a = -1.0;
  double sigmoid_b = 0.0;
  bool calibration_fallback = false;

  std::size_t dimension() const { return standardizer.mean.size(); }
  double decision(std::span<const double> raw) const;
  double soft_from_decision(double d) const;
  double soft(std::span<const double> raw) const;
  int hard(std::span<const double> raw) const { return soft(raw) >= 0.5 ? 1 : 0; }
};

/// Labels are 0 (benign) / 1 (MM). Throws InsufficientData for a single
/// class and Degenerate when all training vectors coincide.
SvmModel train_svm(const FeatureMatrix& x, std::span<const int> labels, const SvmParams& params);

/// Slope of soft = 1/(1+exp(a d)) maximizing the likelihood of Platt's
/// smoothed targets; returns a value < 0, or 0 when no such fit exists.
double fit_sigmoid_slope(std::span<const double> decisions, std::span<const int> labels);

nlohmann::json svm_to_json(const SvmModel& m);
SvmModel svm_from_json(const nlohmann::json& j);

}  // namespace dermscan
