#include <doctest.h>

#include <algorithm>

#include "dermscan/classify.hpp"
#include "dermscan/eval.hpp"
#include "dermscan/random.hpp"
#include "dermscan/svm.hpp"

using namespace dermscan;

namespace {

struct Toy {
  FeatureMatrix x;
  std::vector<int> y;
};

Toy blobs(int n0, int n1, double sep, double spread, std::uint64_t seed, int dim = 2) {
  Rng rng(seed);
  Toy t;
  for (int i = 0; i < n0 + n1; ++i) {
    const int label = i < n0 ? 0 : 1;
    std::vector<double> row(dim);
    for (int d = 0; d < dim; ++d) row[d] = spread * rng.normal() + (label ? sep : -sep) * (d == 0);
    t.x.push_back(row);
    t.y.push_back(label);
  }
  return t;
}

// Largest KKT violation of the dual in the LIBSVM form m(a) - M(a).
double kkt_gap(const std::vector<double>& gram, const std::vector<int>& y, const std::vector<double>& box,
               const std::vector<double>& a) {
  const std::size_t n = y.size();
  double up = -1e300, low = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    double g = -1.0;
    for (std::size_t j = 0; j < n; ++j) g += y[i] * y[j] * gram[i * n + j] * a[j];
    const double v = -y[i] * g;
    const bool in_up = (y[i] > 0 && a[i] < box[i]) || (y[i] < 0 && a[i] > 0);
    const bool in_low = (y[i] > 0 && a[i] > 0) || (y[i] < 0 && a[i] < box[i]);
    if (in_up) up = std::max(up, v);
    if (in_low) low = std::min(low, v);
  }
  return up - low;
}

}  // namespace

TEST_CASE("svm separates separable data") {
  const Toy t = blobs(30, 30, 3.0, 0.5, 1);
  SvmParams p;
  p.c = 10.0;
  const SvmModel m = train_svm(t.x, t.y, p);
  for (std::size_t i = 0; i < t.x.size(); ++i) CHECK(m.hard(t.x[i]) == t.y[i]);
  CHECK(m.soft(std::vector<double>{3.5, 0.0}) > 0.9);
  CHECK(m.soft_from_decision(0.0) == doctest::Approx(1.0 / (1.0 + std::exp(m.sigmoid_b))));
  CHECK(m.soft_from_decision(0.0) == 0.5);
}

TEST_CASE("dual solver meets the KKT tolerance") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Toy t = blobs(25, 15, 0.8, 1.0, seed, 3);
    const std::size_t n = t.x.size();
    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) gram[i * n + j] = rbf_kernel(t.x[i], t.x[j], 0.5);
    std::vector<int> y;
    std::vector<double> box;
    for (int l : t.y) y.push_back(l ? 1 : -1), box.push_back(l ? 1.5 : 1.0);
    const DualSolution s = solve_dual(gram, y, box, 1e-3);
    double eq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.alpha[i] >= 0.0);
      CHECK(s.alpha[i] <= box[i]);
      eq += y[i] * s.alpha[i];
    }
    CHECK(std::abs(eq) <= 1e-9);
    CHECK(kkt_gap(gram, y, box, s.alpha) <= 1e-3);
  }
}

TEST_CASE("ambiguous points go to the heavier class") {
  const Toy b = blobs(20, 0, 0.0, 1.0, 3);
  FeatureMatrix x = b.x;
  std::vector<int> y(20, 0);
  for (const auto& row : b.x) x.push_back(row), y.push_back(1);
  SvmParams p;
  p.calibrate = false;
  const SvmModel m = train_svm(x, y, p);
  for (const auto& row : b.x) CHECK(m.hard(row) == 1);
}

TEST_CASE("svm errors and serialization") {
  const Toy t = blobs(10, 10, 2.0, 1.0, 4);
  CHECK_THROWS_AS(train_svm(t.x, std::vector<int>(20, 1), SvmParams{}), Error);
  CHECK_THROWS_AS(train_svm(FeatureMatrix(6, {1.0, 2.0}), std::vector<int>{0, 1, 0, 1, 0, 1}, SvmParams{}), Error);
  const SvmModel m = train_svm(t.x, t.y, SvmParams{});
  const SvmModel back = svm_from_json(nlohmann::json::parse(svm_to_json(m).dump()));
  for (const auto& row : t.x) CHECK(back.soft(row) == m.soft(row));
}

TEST_CASE("knn") {
  KnnModel k;
  k.store = {{1, 0}, {0, 1}, {1, 1}};
  k.labels = {1, 0, 0};
  CHECK(k.soft(std::vector<double>{1, 0.01}) == doctest::Approx(1.0 / (1.0 + cosine_distance(std::vector<double>{1, 0.01}, k.store[0]) /
                                                                               cosine_distance(std::vector<double>{1, 0.01}, k.store[2]))));
  // d_m = 0 with a benign second neighbour.
  CHECK(k.soft(std::vector<double>{2, 0}) == 1.0);

  KnnModel two;
  two.store = {{1, 0}, {0.9, 0.1}, {0, 1}};
  two.labels = {1, 1, 0};
  CHECK(two.soft(std::vector<double>{1, 0.05}) == 1.0);
  two.labels = {0, 0, 1};
  CHECK(two.soft(std::vector<double>{1, 0.05}) == 0.0);
  CHECK(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{1, 0}) == 1.0);
}

TEST_CASE("knn mixed-neighbour formula") {
  // Query at angle 0; MM neighbour at distance 1 - cos(a), benign at 1 - cos(b)
  // chosen so d_m = 1 and d_b = 3 after scaling by a common factor.
  const double dm = 0.01, db = 0.03;
  const double am = std::acos(1 - dm), ab = std::acos(1 - db);
  KnnModel k;
  k.store = {{std::cos(am), std::sin(am)}, {std::cos(ab), -std::sin(ab)}, {-1, 0}};
  k.labels = {1, 0, 0};
  CHECK(k.soft(std::vector<double>{1, 0}) == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("sum fusion is a logical or") {
  for (int bits = 0; bits < 16; ++bits) {
    const std::vector<int> h{bits & 1, bits >> 1 & 1, bits >> 2 & 1, bits >> 3 & 1};
    CHECK(fuse_sum(h) == (bits != 0 ? 1 : 0));
  }
  const FusionModel f = make_sum_fusion(4);
  CHECK(f.hard(std::vector<double>{0.9, 0.1, 0.2, 0.3}) == 1);
  CHECK(f.hard(std::vector<double>{0, 0, 0, 0}) == 0);
}

TEST_CASE("weighted fusion") {
  // Member 0 is perfect, member 1 is constant.
  const FeatureMatrix val{{0.9, 0.5}, {0.8, 0.5}, {0.1, 0.5}, {0.2, 0.5}};
  const std::vector<int> y{1, 1, 0, 0};
  const FusionModel auc = fit_weighted_fusion(val, y, FusionMode::WeightedAuc);
  CHECK(auc.weights == std::vector<double>{1.0, 0.5});

  const FeatureMatrix perfect{{0.9, 0.9, 0.8, 0.7}, {0.6, 0.7, 0.9, 0.8}, {0.1, 0.2, 0.3, 0.1}, {0.2, 0.1, 0.0, 0.4}};
  const FusionModel p = fit_weighted_fusion(perfect, y, FusionMode::WeightedAuc);
  CHECK(p.threshold == 1.0);

  // Six hand-made validation rows, threshold checked by a full sweep.
  const FeatureMatrix six{{0.9, 0.2, 0.7}, {0.6, 0.8, 0.4}, {0.3, 0.6, 0.9},
                          {0.4, 0.1, 0.2}, {0.7, 0.3, 0.1}, {0.2, 0.7, 0.3}};
  const std::vector<int> y6{1, 1, 1, 0, 0, 0};
  for (FusionMode mode : {FusionMode::WeightedAuc, FusionMode::WeightedSens}) {
    const FusionModel f = fit_weighted_fusion(six, y6, mode);
    double best_ba = -1, best_t = 0;
    std::vector<double> cands;
    for (int s = 1; s < 8; ++s) {
      double t = 0;
      for (int c = 0; c < 3; ++c)
        if (s >> c & 1) t += f.weights[c];
      if (t > 0) cands.push_back(t);
    }
    std::sort(cands.begin(), cands.end());
    for (double t : cands) {
      std::vector<int> pred;
      for (const auto& row : six) {
        double v = 0;
        for (int c = 0; c < 3; ++c) v += f.weights[c] * (row[c] >= 0.5);
        pred.push_back(v >= t);
      }
      const double ba = *confusion_metrics(pred, y6).balanced_accuracy;
      if (ba > best_ba) best_ba = ba, best_t = t;
    }
    CHECK(f.threshold == best_t);
  }
}

TEST_CASE("hierarchical fusion") {
  const FeatureMatrix soft{{0.9, 0.8, 0.7, 0.9}, {0.8, 0.9, 0.6, 0.7}, {0.7, 0.6, 0.9, 0.8},
                           {0.2, 0.1, 0.3, 0.2}, {0.1, 0.3, 0.2, 0.1}, {0.3, 0.2, 0.1, 0.3}};
  const std::vector<int> y{1, 1, 1, 0, 0, 0};
  SvmParams p;
  p.calibration_folds = 2;
  const FusionModel f = train_hierarchical(soft, y, p);
  for (std::size_t i = 0; i < soft.size(); ++i) CHECK(f.hard(soft[i]) == y[i]);
  CHECK(f.hard(std::vector<double>{0, 0, 0, 0}) == 0);

  // Reordering the training rows does not change the model.
  const FeatureMatrix rev(soft.rbegin(), soft.rend());
  const std::vector<int> ry(y.rbegin(), y.rend());
  const FusionModel g = train_hierarchical(rev, ry, p);
  for (const auto& row : soft) CHECK(g.inner->decision(row) == doctest::Approx(f.inner->decision(row)).epsilon(1e-3));

  const FusionModel back = fusion_from_json(fusion_to_json(f));
  for (const auto& row : soft) CHECK(back.soft(row) == f.soft(row));
}
