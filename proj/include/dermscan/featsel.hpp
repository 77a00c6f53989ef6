#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dermscan/features.hpp"

namespace dermscan {

/// Equal-width bins over the training range; values outside it clamp to the
/// extreme bins. Bin b covers [lo + b*w, lo + (b+1)*w).
struct Discretizer {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 5;

  int bin(double v) const;
};

Discretizer fit_discretizer(std::span<const double> training, int bins);
std::vector<int> discretize(std::span<const double> values, const Discretizer& d);

/// Plug-in entropy and mutual information in bits.
double entropy(std::span<const int> x);
double mutual_information(std::span<const int> x, std::span<const int> y);
/// MI / min(H(x), H(y)); throws Degenerate when either entropy is zero.
double nmi(std::span<const int> x, std::span<const int> y);

/// Average-neighbourhood-margin quality of one feature. The feature is
/// min-max normalized first; neighbourhoods hold ceil(fraction * |class|)
/// samples, nearest in the feature's own value.
double anm_quality(std::span<const double> f, std::span<const int> labels, double neighbor_fraction = 0.5);

enum class Criterion { MI, Hybrid };
std::string criterion_name(Criterion c);
Criterion parse_criterion(const std::string& s);

struct SelectionParams {
  Criterion criterion = Criterion::Hybrid;
  double alpha = 0.4;
  int bins = 5;
  double neighbor_fraction = 0.5;

  void validate() const;
};

/// Precomputed per-feature quantities for greedy selection over a fixed set
/// of samples. Columns are addressed by their catalog index.
class SelectionData {
 public:
  SelectionData(const FeatureMatrix& x, std::span<const int> labels, std::span<const std::size_t> columns,
                const SelectionParams& params);

  bool constant(std::size_t column) const;
  double relevance(std::size_t column) const;  // MI(L, f)
  double quality(std::size_t column) const;    // ANM Q(f)
  double redundancy(std::size_t column, std::size_t other);  // NMI, cached

  /// MI(L, f) minus the mean NMI against the selected set.
  double nmifs_score(std::size_t column, std::span<const std::size_t> selected);

 private:
  struct Column {
    bool constant = false;
    std::vector<int> bins;
    double relevance = 0.0;
    double quality = 0.0;
  };
  const Column& col(std::size_t column) const;

  std::vector<std::size_t> index_;
  std::vector<Column> cols_;
  std::vector<double> nmi_cache_;
};

struct StepChoice {
  std::size_t index = 0;
  double score = 0.0;
};

/// Greedy steps; ties (within 1e-12) go to the lowest index.
StepChoice nmifs_step(SelectionData& data, std::span<const std::size_t> candidates,
                      std::span<const std::size_t> selected);
StepChoice hybrid_step(SelectionData& data, std::span<const std::size_t> candidates,
                       std::span<const std::size_t> selected, double alpha);

struct SelectionResult {
  std::vector<std::size_t> indices;  // catalog order of selection
  std::vector<double> scores;        // criterion value at each step
  SelectionParams params;
};

/// `m` greedy steps within `category`. Constant features are never chosen
/// while a non-constant one remains; if needed they are appended in index
/// order with score 0.
SelectionResult select_features(const FeatureMatrix& x, std::span<const int> labels,
                                std::span<const std::size_t> category, std::size_t m, const SelectionParams& params);

}  // namespace dermscan
