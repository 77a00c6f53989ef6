#include "dermscan/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dermscan/error.hpp"
#include "dermscan/eval.hpp"

namespace dermscan {

namespace {

constexpr double kTau = 1e-12;

void check_finite(const FeatureMatrix& x) {
  for (const auto& row : x)
    for (double v : row)
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "SVM input contains a non-finite value");
}

}  // namespace

Standardizer Standardizer::fit(const FeatureMatrix& x) {
  if (x.empty()) throw Error(ErrorKind::InsufficientData, "standardization needs samples");
  const std::size_t d = x.front().size();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& row : x) {
    if (row.size() != d) throw Error(ErrorKind::InvalidArgument, "ragged feature matrix");
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
  }
  for (double& m : s.mean) m /= static_cast<double>(x.size());
  for (const auto& row : x)
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
  for (double& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(x.size()));
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size())
    throw Error(ErrorKind::InvalidArgument, "feature dimension " + std::to_string(row.size()) + " does not match model (" +
                                                std::to_string(mean.size()) + ")");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
  return out;
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * d2);
}

DualSolution solve_dual(std::span<const double> gram, std::span<const int> y, std::span<const double> box,
                        double tolerance, long max_iterations) {
  const std::size_t n = y.size();
  if (gram.size() != n * n || box.size() != n) throw Error(ErrorKind::InvalidArgument, "dual problem size mismatch");
  auto K = [&](std::size_t i, std::size_t j) { return gram[i * n + j]; };
  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double>& a = sol.alpha;
  std::vector<double> G(n, -1.0);
  auto upper = [&](std::size_t t) { return a[t] >= box[t]; };
  auto lower = [&](std::size_t t) { return a[t] <= 0.0; };

  while (sol.iterations < max_iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -G[t] >= gmax) gmax = -G[t], i = t;
      } else if (!lower(t) && G[t] >= gmax) {
        gmax = G[t], i = t;
      }
    }
    if (i == n) break;
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      double grad_diff;
      if (y[t] == 1) {
        if (lower(t)) continue;
        grad_diff = gmax + G[t];
        gmax2 = std::max(gmax2, G[t]);
      } else {
        if (upper(t)) continue;
        grad_diff = gmax - G[t];
        gmax2 = std::max(gmax2, -G[t]);
      }
      if (grad_diff > 0.0) {
        double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) best_obj = obj, j = t;
      }
    }
    if (gmax + gmax2 < tolerance || j == n) break;
    ++sol.iterations;

    const double ci = box[i], cj = box[j];
    const double old_i = a[i], old_j = a[j];
    const double qij = y[i] * y[j] * K(i, j);
    if (y[i] != y[j]) {
      double quad = K(i, i) + K(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) a[j] = 0.0, a[i] = diff;
      } else if (a[i] < 0.0) {
        a[i] = 0.0, a[j] = -diff;
      }
      if (diff > ci - cj) {
        if (a[i] > ci) a[i] = ci, a[j] = ci - diff;
      } else if (a[j] > cj) {
        a[j] = cj, a[i] = cj + diff;
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > ci) {
        if (a[i] > ci) a[i] = ci, a[j] = sum - ci;
      } else if (a[j] < 0.0) {
        a[j] = 0.0, a[i] = sum;
      }
      if (sum > cj) {
        if (a[j] > cj) a[j] = cj, a[i] = sum - cj;
      } else if (a[i] < 0.0) {
        a[i] = 0.0, a[j] = sum;
      }
    }
    const double di = a[i] - old_i, dj = a[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) G[t] += y[i] * y[t] * K(i, t) * di + y[j] * y[t] * K(j, t) * dj;
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum = 0.0;
  long free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      sum += yg;
    }
  }
  const double rho = free_count > 0 ? sum / free_count : (ub + lb) / 2.0;
  sol.bias = -rho;
  return sol;
}

void SvmParams::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "SVM C must be positive");
  if (!(mm_weight > 0.0)) throw Error(ErrorKind::InvalidArgument, "MM penalty weight must be positive");
  if (!(tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "SVM tolerance must be positive");
  if (!std::isfinite(gamma)) throw Error(ErrorKind::InvalidArgument, "SVM gamma must be finite");
}

double SvmModel::decision(std::span<const double> raw) const {
  const std::vector<double> z = standardizer.apply(raw);
  double d = bias;
  for (std::size_t i = 0; i < support.size(); ++i) d += coef[i] * rbf_kernel(support[i], z, gamma);
  return d;
}

double SvmModel::soft_from_decision(double d) const { return 1.0 / (1.0 + std::exp(sigmoid_a * d + sigmoid_b)); }

double SvmModel::soft(std::span<const double> raw) const { return soft_from_decision(decision(raw)); }

double fit_sigmoid_slope(std::span<const double> decisions, std::span<const int> labels) {
  long pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg)++;
  const double t_pos = (pos + 1.0) / (pos + 2.0), t_neg = 1.0 / (neg + 2.0);
  auto gradient = [&](double a) {
    double g = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(a * decisions[i]));
      g += decisions[i] * ((labels[i] ? t_pos : t_neg) - p);
    }
    return g;
  };
  if (gradient(0.0) <= 0.0) return 0.0;
  double lo = -1000.0, hi = 0.0;
  if (gradient(lo) > 0.0) return lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gradient(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

SvmModel fit_uncalibrated(const FeatureMatrix& x, std::span<const int> labels, const SvmParams& p) {
  check_finite(x);
  long pos = 0;
  for (int l : labels) pos += l != 0;
  if (pos == 0 || pos == static_cast<long>(labels.size()))
    throw Error(ErrorKind::InsufficientData, "SVM training needs both classes");
  SvmModel m;
  m.standardizer = Standardizer::fit(x);
  const std::size_t n = x.size(), d = m.standardizer.mean.size();
  if (d == 0) throw Error(ErrorKind::InvalidArgument, "SVM needs at least one feature");
  std::vector<std::vector<double>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = m.standardizer.apply(x[i]);
  bool identical = true;
  for (std::size_t i = 1; i < n && identical; ++i) identical = z[i] == z[0];
  if (identical) throw Error(ErrorKind::Degenerate, "all SVM training vectors are identical");

  m.gamma = p.gamma > 0.0 ? p.gamma : 1.0 / static_cast<double>(d);
  m.c_mm = p.c * p.mm_weight;
  m.c_benign = p.c;
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) gram[i * n + j] = gram[j * n + i] = rbf_kernel(z[i], z[j], m.gamma);
  std::vector<int> y(n);
  std::vector<double> box(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i] ? 1 : -1;
    box[i] = labels[i] ? m.c_mm : m.c_benign;
  }
  const DualSolution sol = solve_dual(gram, y, box, p.tolerance);
  for (std::size_t i = 0; i < n; ++i)
    if (sol.alpha[i] > 0.0) {
      m.support.push_back(z[i]);
      m.coef.push_back(sol.alpha[i] * y[i]);
    }
  m.bias = sol.bias;
  return m;
}

}  // namespace

SvmModel train_svm(const FeatureMatrix& x, std::span<const int> labels, const SvmParams& params) {
  params.validate();
  if (x.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "feature rows and labels differ in count");
  SvmModel m = fit_uncalibrated(x, labels, params);
  if (!params.calibrate) return m;

  // Slope-only calibration on held-out decision values keeps soft = 0.5
  // exactly at the decision boundary.
  double slope = 0.0;
  try {
    const std::vector<int> fold = stratified_kfold(labels, params.calibration_folds, params.seed);
    std::vector<double> dec;
    std::vector<int> lab;
    for (int f = 0; f < params.calibration_folds; ++f) {
      FeatureMatrix xt;
      std::vector<int> yt;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (fold[i] != f) {
          xt.push_back(x[i]);
          yt.push_back(labels[i]);
        }
      const SvmModel inner = fit_uncalibrated(xt, yt, params);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (fold[i] == f) {
          dec.push_back(inner.decision(x[i]));
          lab.push_back(labels[i]);
        }
    }
    slope = fit_sigmoid_slope(dec, lab);
  } catch (const Error&) {
    slope = 0.0;
  }
  if (slope < 0.0) {
    m.sigmoid_a = slope;
  } else {
    m.sigmoid_a = -1.0;
    m.calibration_fallback = true;
  }
  m.sigmoid_b = 0.0;
  return m;
}

nlohmann::json svm_to_json(const SvmModel& m) {
  return {{"mean", m.standardizer.mean}, {"scale", m.standardizer.scale}, {"gamma", m.gamma},
          {"c_mm", m.c_mm},             {"c_benign", m.c_benign},          {"support", m.support},
          {"coef", m.coef},             {"bias", m.bias},                  {"sigmoid_a", m.sigmoid_a},
          {"sigmoid_b", m.sigmoid_b},   {"calibration_fallback", m.calibration_fallback}};
}

SvmModel svm_from_json(const nlohmann::json& j) {
  SvmModel m;
  m.standardizer.mean = j.at("mean").get<std::vector<double>>();
  m.standardizer.scale = j.at("scale").get<std::vector<double>>();
  m.gamma = j.at("gamma").get<double>();
  m.c_mm = j.at("c_mm").get<double>();
  m.c_benign = j.at("c_benign").get<double>();
  m.support = j.at("support").get<std::vector<std::vector<double>>>();
  m.coef = j.at("coef").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.sigmoid_a = j.at("sigmoid_a").get<double>();
  m.sigmoid_b = j.at("sigmoid_b").get<double>();
  m.calibration_fallback = j.value("calibration_fallback", false);
  const std::size_t d = m.standardizer.mean.size();
  if (m.standardizer.scale.size() != d || m.coef.size() != m.support.size() || m.support.empty())
    throw Error(ErrorKind::Format, "inconsistent SVM model");
  for (const auto& s : m.support)
    if (s.size() != d) throw Error(ErrorKind::Format, "support vector dimension mismatch");
  return m;
}

}  // namespace dermscan
