#include "dermscan/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "dermscan/error.hpp"

namespace dermscan {

namespace {

constexpr double kTieTolerance = 1e-12;

bool better(double score, double best) { return score > best + kTieTolerance * std::max(1.0, std::abs(best)); }

std::vector<int> dense_codes(std::span<const int> x, int& levels) {
  std::vector<int> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  levels = static_cast<int>(sorted.size());
  std::vector<int> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), x[i]) - sorted.begin());
  return out;
}

}  // namespace

int Discretizer::bin(double v) const {
  const double t = static_cast<double>(bins) * (v - lo) / (hi - lo);
  if (!(t > 0.0)) return 0;
  if (t >= bins) return bins - 1;
  return std::min(bins - 1, static_cast<int>(std::floor(t)));
}

Discretizer fit_discretizer(std::span<const double> training, int bins) {
  if (bins < 2) throw Error(ErrorKind::InvalidArgument, "discretization needs at least two bins");
  if (training.empty()) throw Error(ErrorKind::InsufficientData, "discretization needs training values");
  const auto [mn, mx] = std::minmax_element(training.begin(), training.end());
  if (!(*mx > *mn)) throw Error(ErrorKind::Degenerate, "cannot discretize a constant feature");
  return {*mn, *mx, bins};
}

std::vector<int> discretize(std::span<const double> values, const Discretizer& d) {
  std::vector<int> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = d.bin(values[i]);
  return out;
}

double entropy(std::span<const int> x) {
  if (x.empty()) return 0.0;
  int levels = 0;
  const auto codes = dense_codes(x, levels);
  std::vector<long> count(levels, 0);
  for (int c : codes) ++count[c];
  const double n = static_cast<double>(x.size());
  double h = 0.0;
  for (long c : count)
    if (c > 0) h -= (c / n) * std::log2(c / n);
  return h;
}

double mutual_information(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::InvalidArgument, "mutual information needs equal lengths");
  if (x.size() < 2) throw Error(ErrorKind::InsufficientData, "mutual information needs at least two samples");
  int lx = 0, ly = 0;
  const auto cx = dense_codes(x, lx);
  const auto cy = dense_codes(y, ly);
  std::vector<long> joint(static_cast<std::size_t>(lx) * ly, 0), mx(lx, 0), my(ly, 0);
  for (std::size_t i = 0; i < cx.size(); ++i) {
    ++joint[static_cast<std::size_t>(cx[i]) * ly + cy[i]];
    ++mx[cx[i]];
    ++my[cy[i]];
  }
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (int a = 0; a < lx; ++a)
    for (int b = 0; b < ly; ++b) {
      const long c = joint[static_cast<std::size_t>(a) * ly + b];
      if (c == 0) continue;
      mi += (c / n) * std::log2(c * n / (static_cast<double>(mx[a]) * my[b]));
    }
  return std::max(0.0, mi);
}

double nmi(std::span<const int> x, std::span<const int> y) {
  const double h = std::min(entropy(x), entropy(y));
  if (!(h > 0.0)) throw Error(ErrorKind::Degenerate, "normalized MI undefined for a zero-entropy variable");
  return std::clamp(mutual_information(x, y) / h, 0.0, 1.0);
}

double anm_quality(std::span<const double> f, std::span<const int> labels, double neighbor_fraction) {
  if (f.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "feature and labels differ in length");
  if (!(neighbor_fraction > 0.0 && neighbor_fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "neighbourhood fraction must lie in (0, 1]");
  const std::size_t n = f.size();
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0;
  if (pos < 2 || n - pos < 2) throw Error(ErrorKind::InsufficientData, "ANM quality needs two samples per class");

  const auto [mn, mx] = std::minmax_element(f.begin(), f.end());
  const double range = *mx - *mn;
  if (!(range > 0.0)) return 0.0;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (f[i] - *mn) / range;

  double q = 0.0;
  std::vector<double> same, other;
  for (std::size_t i = 0; i < n; ++i) {
    same.clear();
    other.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      ((labels[j] != 0) == (labels[i] != 0) ? same : other).push_back(std::abs(v[i] - v[j]));
    }
    const std::size_t class_size = same.size() + 1;
    std::size_t k = static_cast<std::size_t>(std::ceil(neighbor_fraction * static_cast<double>(class_size)));
    k = std::clamp<std::size_t>(k, 1, std::min(same.size(), other.size()));
    std::partial_sort(same.begin(), same.begin() + static_cast<long>(k), same.end());
    std::partial_sort(other.begin(), other.begin() + static_cast<long>(k), other.end());
    double mo = 0.0, me = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      mo += same[t];
      me += other[t];
    }
    q += std::abs(me / static_cast<double>(k) - mo / static_cast<double>(k));
  }
  return q;
}

std::string criterion_name(Criterion c) { return c == Criterion::MI ? "mi" : "hybrid"; }

Criterion parse_criterion(const std::string& s) {
  if (s == "mi") return Criterion::MI;
  if (s == "hybrid") return Criterion::Hybrid;
  throw Error(ErrorKind::InvalidArgument, "unknown selection criterion '" + s + "' (expected mi or hybrid)");
}

void SelectionParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in [0, 1]");
  if (bins < 2 || bins > 6) throw Error(ErrorKind::InvalidArgument, "bin count must lie in 2..6");
  if (!(neighbor_fraction > 0.0 && neighbor_fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "neighbourhood fraction must lie in (0, 1]");
}

SelectionData::SelectionData(const FeatureMatrix& x, std::span<const int> labels, std::span<const std::size_t> columns,
                             const SelectionParams& params)
    : index_(columns.begin(), columns.end()) {
  params.validate();
  if (x.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "feature rows and labels differ in count");
  std::vector<int> lab(labels.begin(), labels.end());
  cols_.resize(index_.size());
  std::vector<double> v(x.size());
  for (std::size_t c = 0; c < index_.size(); ++c) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (index_[c] >= x[i].size()) throw Error(ErrorKind::InvalidArgument, "feature index out of range");
      v[i] = x[i][index_[c]];
    }
    Column& col = cols_[c];
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    col.constant = !(*mx > *mn);
    if (col.constant) continue;
    col.bins = discretize(v, fit_discretizer(v, params.bins));
    col.relevance = mutual_information(lab, col.bins);
    if (params.criterion == Criterion::Hybrid) col.quality = anm_quality(v, lab, params.neighbor_fraction);
  }
  nmi_cache_.assign(index_.size() * index_.size(), std::numeric_limits<double>::quiet_NaN());
}

const SelectionData::Column& SelectionData::col(std::size_t column) const {
  const auto it = std::find(index_.begin(), index_.end(), column);
  if (it == index_.end()) throw Error(ErrorKind::InvalidArgument, "feature not part of the selection data");
  return cols_[static_cast<std::size_t>(it - index_.begin())];
}

bool SelectionData::constant(std::size_t column) const { return col(column).constant; }
double SelectionData::relevance(std::size_t column) const { return col(column).relevance; }
double SelectionData::quality(std::size_t column) const { return col(column).quality; }

double SelectionData::redundancy(std::size_t column, std::size_t other) {
  const auto a = static_cast<std::size_t>(std::find(index_.begin(), index_.end(), column) - index_.begin());
  const auto b = static_cast<std::size_t>(std::find(index_.begin(), index_.end(), other) - index_.begin());
  if (a >= index_.size() || b >= index_.size()) throw Error(ErrorKind::InvalidArgument, "feature not part of the selection data");
  double& slot = nmi_cache_[std::min(a, b) * index_.size() + std::max(a, b)];
  if (std::isnan(slot)) slot = nmi(cols_[a].bins, cols_[b].bins);
  return slot;
}

double SelectionData::nmifs_score(std::size_t column, std::span<const std::size_t> selected) {
  double score = relevance(column);
  if (selected.empty()) return score;
  double red = 0.0;
  for (std::size_t s : selected) red += redundancy(column, s);
  return score - red / static_cast<double>(selected.size());
}

StepChoice nmifs_step(SelectionData& data, std::span<const std::size_t> candidates,
                      std::span<const std::size_t> selected) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidArgument, "no candidate features");
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end());
  StepChoice best{order.front(), data.nmifs_score(order.front(), selected)};
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double s = data.nmifs_score(order[i], selected);
    if (better(s, best.score)) best = {order[i], s};
  }
  return best;
}

StepChoice hybrid_step(SelectionData& data, std::span<const std::size_t> candidates,
                       std::span<const std::size_t> selected, double alpha) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidArgument, "no candidate features");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in [0, 1]");
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end());
  double qmax = 0.0;
  for (std::size_t c : order) qmax = std::max(qmax, data.quality(c));
  auto score = [&](std::size_t c) {
    const double qn = qmax > 0.0 ? data.quality(c) / qmax : 0.0;
    return alpha * qn + (1.0 - alpha) * data.nmifs_score(c, selected);
  };
  StepChoice best{order.front(), score(order.front())};
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double s = score(order[i]);
    if (better(s, best.score)) best = {order[i], s};
  }
  return best;
}

SelectionResult select_features(const FeatureMatrix& x, std::span<const int> labels,
                                std::span<const std::size_t> category, std::size_t m, const SelectionParams& params) {
  if (m > category.size())
    throw Error(ErrorKind::InvalidArgument, "cannot select " + std::to_string(m) + " of " +
                                                std::to_string(category.size()) + " features");
  std::vector<std::size_t> sorted(category.begin(), category.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::InvalidArgument, "duplicate feature in category");

  SelectionData data(x, labels, sorted, params);
  SelectionResult r;
  r.params = params;
  std::vector<std::size_t> remaining, constants;
  for (std::size_t c : sorted) (data.constant(c) ? constants : remaining).push_back(c);

  while (r.indices.size() < m) {
    if (remaining.empty()) {
      r.indices.push_back(constants.front());
      r.scores.push_back(0.0);
      constants.erase(constants.begin());
      continue;
    }
    const StepChoice pick = params.criterion == Criterion::MI ? nmifs_step(data, remaining, r.indices)
                                                              : hybrid_step(data, remaining, r.indices, params.alpha);
    r.indices.push_back(pick.index);
    r.scores.push_back(pick.score);
    remaining.erase(std::find(remaining.begin(), remaining.end(), pick.index));
  }
  return r;
}

}  // namespace dermscan
