#include <doctest.h>

#include <numeric>
#include <set>

#include "dermscan/featsel.hpp"
#include "dermscan/random.hpp"
#include "oracles.hpp"

using namespace dermscan;

namespace {

FeatureMatrix columns_to_rows(const std::vector<std::vector<double>>& cols) {
  FeatureMatrix x(cols.front().size(), std::vector<double>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < cols[c].size(); ++r) x[r][c] = cols[c][r];
  return x;
}

std::vector<int> balanced_labels(int n) {
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) y[i] = i % 2;
  return y;
}

}  // namespace

TEST_CASE("discretizer") {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 0.0);
  const Discretizer d = fit_discretizer(v, 5);
  CHECK(discretize(v, d) == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4});
  CHECK(d.bin(-3.0) == 0);
  CHECK(d.bin(100.0) == 4);
  const Discretizer two = fit_discretizer(std::vector<double>{2.0, 6.0}, 2);
  CHECK(two.bin(4.0) == 1);
  CHECK_THROWS_AS(fit_discretizer(std::vector<double>{3.0, 3.0}, 5), Error);
}

TEST_CASE("mutual information") {
  const std::vector<int> x{0, 1, 0, 1, 0, 1};
  CHECK(mutual_information(x, x) == doctest::Approx(1.0));
  // Product table: every (a, b) pair once.
  const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
  CHECK(mutual_information(a, b) == doctest::Approx(0.0));

  const int table[3][3] = {{2, 1, 0}, {0, 2, 1}, {1, 0, 2}};
  std::vector<int> tx, ty;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int c = 0; c < table[i][j]; ++c) tx.push_back(i), ty.push_back(j);
  CHECK(std::abs(mutual_information(tx, ty) - oracle::mutual_information(tx, ty)) <= 1e-12);
  CHECK(std::abs(entropy(tx) - std::log2(3.0)) <= 1e-12);
}

TEST_CASE("normalized mutual information") {
  const std::vector<int> x{0, 1, 2, 0, 1, 2};
  CHECK(nmi(x, x) == doctest::Approx(1.0));
  CHECK(nmi(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}) == doctest::Approx(0.0));
  const std::vector<int> y{0, 1, 2, 3, 4, 5};
  std::vector<int> fx;
  for (int v : y) fx.push_back(v / 2);
  CHECK(nmi(fx, y) == doctest::Approx(1.0));
  CHECK_THROWS_AS(nmi(std::vector<int>{1, 1, 1}, std::vector<int>{0, 1, 0}), Error);
}

TEST_CASE("anm quality") {
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  CHECK(anm_quality(std::vector<double>{0, 0, 0, 1, 1, 1}, y) == doctest::Approx(6.0));
  CHECK(anm_quality(std::vector<double>{4, 4, 4, 4, 4, 4}, y) == 0.0);
  const std::vector<double> f{0.3, 1.2, -0.5, 2.0, 0.9, 1.7};
  CHECK(std::abs(anm_quality(f, y) - oracle::anm(f, y, 0.5)) <= 1e-12);
  CHECK(std::abs(anm_quality(f, y, 1.0) - oracle::anm(f, y, 1.0)) <= 1e-12);
}

TEST_CASE("nmifs prefers a novel feature over a duplicate") {
  Rng rng(21);
  const int n = 60;
  const auto y = balanced_labels(n);
  std::vector<double> f0, f2;
  for (int i = 0; i < n; ++i) {
    f0.push_back(rng.uniform() < 0.15 ? 1 - y[i] : y[i]);
    f2.push_back(rng.uniform() < 0.15 ? 1 - y[i] : y[i]);
  }
  const FeatureMatrix x = columns_to_rows({f0, f0, f2});
  const std::vector<std::size_t> cols{0, 1, 2};
  SelectionParams p;
  p.criterion = Criterion::MI;
  SelectionData data(x, y, cols, p);
  const std::vector<std::size_t> selected{0}, candidates{1, 2};
  CHECK(data.redundancy(1, 0) == doctest::Approx(1.0));
  const StepChoice c = nmifs_step(data, candidates, selected);
  CHECK(c.index == 2);

  std::vector<int> b0, b2;
  for (int i = 0; i < n; ++i) b0.push_back(f0[i] > 0.5 ? 4 : 0), b2.push_back(f2[i] > 0.5 ? 4 : 0);
  const double expect = oracle::mutual_information(y, b2) - oracle::nmi(b2, b0);
  CHECK(std::abs(c.score - expect) <= 1e-12);
  CHECK(nmifs_step(data, std::vector<std::size_t>{1}, selected).index == 1);
}

TEST_CASE("hybrid step degenerates at the alpha extremes") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 30;
    const auto y = balanced_labels(n);
    std::vector<std::vector<double>> cols(5, std::vector<double>(n));
    for (auto& c : cols)
      for (int i = 0; i < n; ++i) c[i] = rng.normal() + y[i] * rng.uniform(0.0, 2.0);
    const FeatureMatrix x = columns_to_rows(cols);
    const std::vector<std::size_t> all{0, 1, 2, 3, 4};
    SelectionData data(x, y, all, SelectionParams{});
    const std::vector<std::size_t> selected{static_cast<std::size_t>(trial % 5)};
    std::vector<std::size_t> cand;
    for (std::size_t c : all)
      if (c != selected[0]) cand.push_back(c);
    CHECK(hybrid_step(data, cand, selected, 0.0).index == nmifs_step(data, cand, selected).index);
    std::size_t best_q = cand[0];
    for (std::size_t c : cand)
      if (data.quality(c) > data.quality(best_q)) best_q = c;
    CHECK(hybrid_step(data, cand, selected, 1.0).index == best_q);
  }
}

TEST_CASE("select_features") {
  Rng rng(8);
  const int n = 40;
  const auto y = balanced_labels(n);
  std::vector<std::vector<double>> cols(6, std::vector<double>(n));
  for (auto& c : cols)
    for (int i = 0; i < n; ++i) c[i] = rng.normal() + y[i] * rng.uniform();
  cols[3].assign(n, 2.0);  // constant
  const FeatureMatrix x = columns_to_rows(cols);
  const std::vector<std::size_t> cat{0, 1, 2, 3, 4, 5};
  const SelectionResult all = select_features(x, y, cat, 6, SelectionParams{});
  CHECK(std::set<std::size_t>(all.indices.begin(), all.indices.end()).size() == 6);
  CHECK(all.indices.back() == 3);
  const SelectionResult again = select_features(x, y, cat, 6, SelectionParams{});
  CHECK(again.indices == all.indices);
  CHECK(again.scores == all.scores);
  CHECK(select_features(x, y, std::vector<std::size_t>{4}, 1, SelectionParams{}).indices ==
        std::vector<std::size_t>{4});
  CHECK_THROWS_AS(select_features(x, y, cat, 7, SelectionParams{}), Error);
}
