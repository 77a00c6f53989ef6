#include "dermscan/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dermscan/error.hpp"
#include "dermscan/eval.hpp"

namespace dermscan {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::InvalidArgument, "cosine distance needs equal dimensions");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 1.0;
  return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

double KnnModel::soft(std::span<const double> h) const {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "kNN needs k >= 1");
  if (store.size() < static_cast<std::size_t>(k))
    throw Error(ErrorKind::InsufficientData, "kNN store holds fewer than k samples");
  std::vector<std::pair<double, std::size_t>> d(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) d[i] = {cosine_distance(h, store[i]), i};
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  if (k == 2) {
    const int l0 = labels[d[0].second], l1 = labels[d[1].second];
    if (l0 && l1) return 1.0;
    if (!l0 && !l1) return 0.0;
    const double dm = l0 ? d[0].first : d[1].first;
    const double db = l0 ? d[1].first : d[0].first;
    if (dm + db <= 0.0) return 0.5;
    return db / (dm + db);
  }
  int mm = 0;
  for (int i = 0; i < k; ++i) mm += labels[d[i].second] != 0;
  return static_cast<double>(mm) / k;
}

KnnModel train_knn(const FeatureMatrix& x, std::span<const int> labels, int k) {
  if (x.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "feature rows and labels differ in count");
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "kNN needs k >= 1");
  if (x.size() < static_cast<std::size_t>(k)) throw Error(ErrorKind::InsufficientData, "kNN needs at least k samples");
  KnnModel m;
  m.k = k;
  m.labels.assign(labels.begin(), labels.end());
  for (int& l : m.labels) l = l != 0;
  for (const auto& row : x) {
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    std::vector<double> h(row);
    if (s > 0.0)
      for (double& v : h) v /= s;
    m.store.push_back(std::move(h));
  }
  return m;
}

int fuse_sum(std::span<const int> hard) {
  if (hard.size() != 4) throw Error(ErrorKind::InvalidArgument, "sum fusion takes exactly four decisions");
  int s = 0;
  for (int h : hard) s += h != 0;
  return s >= 1 ? 1 : 0;
}

std::string fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::Sum: return "sum";
    case FusionMode::WeightedSens: return "weighted-sens";
    case FusionMode::WeightedAuc: return "weighted-auc";
    case FusionMode::Hierarchical: return "hierarchical";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  for (FusionMode m : {FusionMode::Sum, FusionMode::WeightedSens, FusionMode::WeightedAuc, FusionMode::Hierarchical})
    if (fusion_mode_name(m) == s) return m;
  throw Error(ErrorKind::InvalidArgument,
              "unknown fusion mode '" + s + "' (expected sum, weighted-sens, weighted-auc or hierarchical)");
}

namespace {

double weighted_vote(const FusionModel& f, std::span<const double> soft) {
  if (soft.size() != f.weights.size()) throw Error(ErrorKind::InvalidArgument, "fusion input size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < soft.size(); ++i)
    if (soft[i] >= 0.5) s += f.weights[i];
  return s;
}

}  // namespace

double FusionModel::soft(std::span<const double> member_soft) const {
  switch (mode) {
    case FusionMode::Sum: {
      double s = 0.0;
      for (double v : member_soft) s += v >= 0.5;
      return s / static_cast<double>(member_soft.size());
    }
    case FusionMode::WeightedSens:
    case FusionMode::WeightedAuc: {
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      return weighted_vote(*this, member_soft) / total;
    }
    case FusionMode::Hierarchical:
      if (!inner) throw Error(ErrorKind::InvalidArgument, "hierarchical fusion without inner model");
      return inner->soft(member_soft);
  }
  return 0.0;
}

int FusionModel::hard(std::span<const double> member_soft) const {
  switch (mode) {
    case FusionMode::Sum: {
      std::vector<int> h;
      for (double v : member_soft) h.push_back(v >= 0.5);
      if (h.size() == 4) return fuse_sum(h);
      return std::any_of(h.begin(), h.end(), [](int x) { return x; }) ? 1 : 0;
    }
    case FusionMode::WeightedSens:
    case FusionMode::WeightedAuc:
      return weighted_vote(*this, member_soft) >= threshold ? 1 : 0;
    case FusionMode::Hierarchical:
      if (!inner) throw Error(ErrorKind::InvalidArgument, "hierarchical fusion without inner model");
      return inner->hard(member_soft);
  }
  return 0;
}

FusionModel make_sum_fusion(std::size_t members) {
  FusionModel f;
  f.mode = FusionMode::Sum;
  f.weights.assign(members, 1.0);
  f.threshold = 1.0;
  return f;
}

FusionModel fit_weighted_fusion(const FeatureMatrix& val_soft, std::span<const int> labels, FusionMode mode) {
  if (mode != FusionMode::WeightedSens && mode != FusionMode::WeightedAuc)
    throw Error(ErrorKind::InvalidArgument, "weighted fusion needs mode weighted-sens or weighted-auc");
  if (val_soft.empty() || val_soft.size() != labels.size())
    throw Error(ErrorKind::InvalidArgument, "validation scores and labels differ in count");
  const std::size_t m = val_soft.front().size();
  if (m == 0 || m > 16) throw Error(ErrorKind::InvalidArgument, "weighted fusion needs 1..16 members");

  FusionModel f;
  f.mode = mode;
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<double> col;
    for (const auto& row : val_soft) col.push_back(row.at(c));
    const Roc roc = roc_auc(col, labels);
    f.weights.push_back(mode == FusionMode::WeightedAuc ? roc.auc : sens_at_spec(roc, 0.5));
  }

  std::vector<double> sums;
  for (std::size_t subset = 1; subset < (std::size_t{1} << m); ++subset) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c)
      if (subset >> c & 1) s += f.weights[c];
    if (s > 0.0) sums.push_back(s);
  }
  if (sums.empty()) throw Error(ErrorKind::Degenerate, "all fusion weights are zero");
  std::sort(sums.begin(), sums.end());
  sums.erase(std::unique(sums.begin(), sums.end()), sums.end());

  std::vector<double> votes;
  f.threshold = sums.front();
  for (const auto& row : val_soft) votes.push_back(weighted_vote(f, row));
  double best = -1.0;
  for (double t : sums) {
    std::vector<int> pred;
    for (double v : votes) pred.push_back(v >= t ? 1 : 0);
    const double ba = confusion_metrics(pred, labels).balanced_accuracy.value_or(0.0);
    if (ba > best) {
      best = ba;
      f.threshold = t;
    }
  }
  return f;
}

FusionModel train_hierarchical(const FeatureMatrix& train_soft, std::span<const int> labels, const SvmParams& params) {
  FusionModel f;
  f.mode = FusionMode::Hierarchical;
  f.inner = train_svm(train_soft, labels, params);
  return f;
}

std::vector<double> CategoryClassifier::project(std::span<const double> full) const {
  std::vector<double> out;
  out.reserve(features.size());
  for (std::size_t i : features) {
    if (i >= full.size()) throw Error(ErrorKind::InvalidArgument, "feature vector shorter than the catalog");
    out.push_back(full[i]);
  }
  return out;
}

double CategoryClassifier::soft(std::span<const double> full) const {
  const std::vector<double> x = project(full);
  if (svm) return svm->soft(x);
  if (knn) return knn->soft(x);
  throw Error(ErrorKind::InvalidArgument, "category classifier '" + std::string(block_name(block)) + "' is not trained");
}

nlohmann::json knn_to_json(const KnnModel& m) { return {{"k", m.k}, {"labels", m.labels}, {"store", m.store}}; }

KnnModel knn_from_json(const nlohmann::json& j) {
  KnnModel m;
  m.k = j.at("k").get<int>();
  m.labels = j.at("labels").get<std::vector<int>>();
  m.store = j.at("store").get<FeatureMatrix>();
  if (m.labels.size() != m.store.size() || m.k < 1) throw Error(ErrorKind::Format, "inconsistent kNN model");
  return m;
}

nlohmann::json fusion_to_json(const FusionModel& m) {
  nlohmann::json j = {{"mode", fusion_mode_name(m.mode)}, {"weights", m.weights}, {"threshold", m.threshold}};
  if (m.inner) j["inner"] = svm_to_json(*m.inner);
  return j;
}

FusionModel fusion_from_json(const nlohmann::json& j) {
  FusionModel m;
  m.mode = parse_fusion_mode(j.at("mode").get<std::string>());
  m.weights = j.at("weights").get<std::vector<double>>();
  m.threshold = j.at("threshold").get<double>();
  if (j.contains("inner")) m.inner = svm_from_json(j.at("inner"));
  if (m.mode == FusionMode::Hierarchical && !m.inner) throw Error(ErrorKind::Format, "hierarchical fusion lacks inner SVM");
  return m;
}

}  // namespace dermscan
