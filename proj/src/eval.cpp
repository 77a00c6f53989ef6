#include "dermscan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dermscan/error.hpp"
#include "dermscan/random.hpp"

namespace dermscan {

namespace {

std::optional<double> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

Metrics confusion_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw Error(ErrorKind::InvalidArgument, "prediction and truth lengths differ");
  Metrics m;
  Confusion& c = m.counts;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  if (m.sensitivity && m.specificity) m.balanced_accuracy = (*m.sensitivity + *m.specificity) / 2.0;
  m.total_accuracy = ratio(c.tp + c.tn, c.total());
  m.ppv = ratio(c.tp, c.tp + c.fp);
  m.npv = ratio(c.tn, c.tn + c.fn);
  return m;
}

Roc roc_auc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw Error(ErrorKind::InvalidArgument, "score and truth lengths differ");
  long pos = 0, neg = 0;
  for (int t : truth) (t ? pos : neg)++;
  if (pos == 0 || neg == 0) throw Error(ErrorKind::InsufficientData, "ROC needs both classes");
  for (double s : scores)
    if (std::isnan(s)) throw Error(ErrorKind::InvalidArgument, "ROC score is NaN");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk thresholds from +inf downwards, then reverse so specificity rises.
  Roc roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (truth[order[i]] ? tp : fp)++;
      ++i;
    }
    roc.points.push_back({t, static_cast<double>(tp) / pos, 1.0 - static_cast<double>(fp) / neg});
  }
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const RocPoint& a = roc.points[i - 1];
    const RocPoint& b = roc.points[i];
    roc.auc += (a.specificity - b.specificity) * (a.sensitivity + b.sensitivity) / 2.0;
  }
  std::reverse(roc.points.begin(), roc.points.end());
  return roc;
}

double sens_at_spec(const Roc& roc, double s) {
  double best = 0.0;
  for (const RocPoint& p : roc.points)
    if (p.specificity >= s) best = std::max(best, p.sensitivity);
  return best;
}

std::vector<int> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "k-fold needs k >= 2");
  std::vector<int> fold(labels.size(), 0);
  Rng rng(seed);
  std::size_t offset = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if ((labels[i] != 0) == (cls != 0)) idx.push_back(i);
    if (idx.size() < static_cast<std::size_t>(k))
      throw Error(ErrorKind::InsufficientData, "class " + std::to_string(cls) + " has fewer than k samples");
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>((offset + i) % k);
    offset += idx.size();
  }
  return fold;
}

CvResult cross_validate(std::span<const int> labels, int k, std::uint64_t seed, const FoldRunner& runner) {
  CvResult r;
  r.fold_of = stratified_kfold(labels, k, seed);
  const std::size_t n = labels.size();
  r.soft.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.hard.assign(n, -1);
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (r.fold_of[i] == f ? test : train).push_back(i);
    FoldRecord rec{f, train.size(), test.size(), std::nullopt, std::nullopt, ""};
    try {
      const FoldOutput out = runner(f, train, test);
      if (out.soft.size() != test.size() || out.hard.size() != test.size())
        throw Error(ErrorKind::InvalidArgument, "fold runner returned the wrong number of predictions");
      std::vector<int> truth;
      for (std::size_t t = 0; t < test.size(); ++t) {
        r.soft[test[t]] = out.soft[t];
        r.hard[test[t]] = out.hard[t];
        truth.push_back(labels[test[t]]);
      }
      rec.metrics = confusion_metrics(out.hard, truth);
      try {
        rec.auc = roc_auc(out.soft, truth).auc;
      } catch (const Error&) {
      }
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    r.folds.push_back(std::move(rec));
  }

  std::vector<int> pred, truth;
  std::vector<double> soft;
  for (std::size_t i = 0; i < n; ++i)
    if (r.hard[i] >= 0) {
      pred.push_back(r.hard[i]);
      truth.push_back(labels[i]);
      soft.push_back(r.soft[i]);
    }
  r.pooled = confusion_metrics(pred, truth);
  try {
    r.roc = roc_auc(soft, truth);
    r.sens_at_spec90 = sens_at_spec(*r.roc, 0.9);
  } catch (const Error&) {
  }
  double sum = 0.0;
  int cnt = 0;
  for (const FoldRecord& f : r.folds)
    if (f.metrics && f.metrics->balanced_accuracy) {
      sum += *f.metrics->balanced_accuracy;
      ++cnt;
    }
  if (cnt > 0) r.mean_fold_balanced_accuracy = sum / cnt;
  return r;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"tn", m.counts.tn},
          {"fn", m.counts.fn},
          {"sensitivity", opt(m.sensitivity)},
          {"specificity", opt(m.specificity)},
          {"balanced_accuracy", opt(m.balanced_accuracy)},
          {"total_accuracy", opt(m.total_accuracy)},
          {"ppv", opt(m.ppv)},
          {"npv", opt(m.npv)}};
}

nlohmann::json cv_to_json(const CvResult& r) {
  nlohmann::json j;
  j["pooled"] = metrics_to_json(r.pooled);
  j["auc"] = r.roc ? nlohmann::json(r.roc->auc) : nlohmann::json(nullptr);
  j["sens_at_spec"] = nlohmann::json::object();
  if (r.roc)
    for (double s : {0.5, 0.8, 0.9, 0.95}) {
      char key[16];
      std::snprintf(key, sizeof key, "%.2f", s);
      j["sens_at_spec"][key] = sens_at_spec(*r.roc, s);
    }
  j["mean_fold_balanced_accuracy"] = opt(r.mean_fold_balanced_accuracy);
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldRecord& f : r.folds) {
    nlohmann::json fj = {{"fold", f.fold}, {"train_size", f.train_size}, {"test_size", f.test_size}};
    fj["metrics"] = f.metrics ? metrics_to_json(*f.metrics) : nlohmann::json(nullptr);
    fj["auc"] = opt(f.auc);
    if (!f.error.empty()) fj["error"] = f.error;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  nlohmann::json roc = nlohmann::json::array();
  if (r.roc)
    for (const RocPoint& p : r.roc->points)
      roc.push_back({std::isfinite(p.threshold) ? nlohmann::json(p.threshold) : nlohmann::json("inf"), p.sensitivity,
                     p.specificity});
  j["roc"] = roc;
  return j;
}

}  // namespace dermscan
