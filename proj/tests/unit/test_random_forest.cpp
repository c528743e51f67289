#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "faultlab/common.hpp"
#include "faultlab/random_forest.hpp"

using namespace faultlab;

namespace {

LabeledSample sample(std::vector<double> x, int label, std::uint64_t seed = 0) {
  LabeledSample s{std::move(x), label_from_code(label), {}};
  s.provenance.label = s.label;
  s.provenance.sample_seed = seed;
  return s;
}

std::vector<std::size_t> all_rows(const TrainingView& v) {
  std::vector<std::size_t> r(v.rows.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Exhaustive search over every (feature, midpoint), scanned in ascending order.
std::optional<Split> brute_force_split(const TrainingView& v, const std::vector<std::size_t>& rows,
                                       std::vector<int> features) {
  std::sort(features.begin(), features.end());
  ClassCounts parent{};
  for (auto r : rows) ++parent[static_cast<std::size_t>(v.labels[r])];
  const double pg = gini(parent);
  const double n = static_cast<double>(rows.size());
  std::optional<Split> best;
  for (int f : features) {
    std::set<double> values;
    for (auto r : rows) values.insert(v.rows[r][static_cast<std::size_t>(f)]);
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double t = (*it + *std::next(it)) / 2.0;
      ClassCounts l{}, rr{};
      for (auto r : rows) ++(v.rows[r][static_cast<std::size_t>(f)] <= t ? l : rr)[static_cast<std::size_t>(v.labels[r])];
      const double nl = std::accumulate(l.begin(), l.end(), 0.0);
      const double dec = pg - (nl / n) * gini(l) - ((n - nl) / n) * gini(rr);
      if (dec > kMinImpurityDecrease && (!best || dec > best->impurity_decrease)) best = Split{f, t, dec};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("gini reference values") {
  CHECK(gini({10, 0, 0, 0, 0, 0, 0, 0}) == 0.0);
  CHECK(gini({5, 5, 0, 0, 0, 0, 0, 0}) == 0.5);
  CHECK(gini({1, 1, 1, 1, 1, 1, 1, 1}) == 0.875);
  CHECK_THROWS_AS(gini({}), InputError);
}

TEST_CASE("best split on the 1-D example") {
  std::vector<LabeledSample> s{sample({0.1}, 0), sample({0.2}, 0), sample({0.8}, 1), sample({0.9}, 1)};
  const TrainingView v = TrainingView::of(s);
  const auto rows = all_rows(v);
  const std::vector<int> f{0};
  const auto split = best_split(v, rows, f);
  REQUIRE(split.has_value());
  CHECK(split->feature == 0);
  CHECK(split->threshold == 0.5);
  CHECK(split->impurity_decrease == 0.5);

  std::vector<LabeledSample> pure{sample({0.1}, 2), sample({0.7}, 2)};
  const TrainingView pv = TrainingView::of(pure);
  CHECK_FALSE(best_split(pv, all_rows(pv), f).has_value());
}

TEST_CASE("best split matches exhaustive search") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.index(8);
    const std::size_t n = 2 + rng.index(29);
    const int classes = 2 + static_cast<int>(rng.index(7));
    const bool coarse = trial % 2 == 0;
    std::vector<LabeledSample> s;
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<double> x(d);
      for (double& v : x) v = coarse ? static_cast<double>(rng.index(4)) / 4.0 : rng.uniform();
      s.push_back(sample(x, static_cast<int>(rng.index(static_cast<std::uint64_t>(classes)))));
    }
    const TrainingView v = TrainingView::of(s);
    const auto rows = all_rows(v);
    std::vector<int> features;
    for (std::size_t f = 0; f < d; ++f)
      if (rng.index(3) != 0 || features.empty()) features.push_back(static_cast<int>(f));
    std::vector<int> shuffled = features;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto got = best_split(v, rows, shuffled);
    const auto want = brute_force_split(v, rows, features);
    CHECK(got.has_value() == want.has_value());
    if (got && want) CHECK(*got == *want);
  }
}

TEST_CASE("tree depth limits and separable data") {
  std::vector<LabeledSample> s;
  for (int k = 0; k < 10; ++k) s.push_back(sample({k / 10.0}, k < 5 ? 1 : 4));
  const TrainingView v = TrainingView::of(s);
  const auto rows = all_rows(v);
  Rng r0(1);
  const DecisionTree stump = tree_fit(v, rows, 0, 1, r0);
  CHECK(stump.nodes.size() == 1);
  CHECK(stump.nodes[0].counts == ClassCounts{0, 5, 0, 0, 5, 0, 0, 0});

  Rng r1(1);
  const DecisionTree t = tree_fit(v, rows, 5, 1, r1);
  CHECK(t.depth() == 1);
  for (const auto& x : s) {
    const auto& leaf = t.leaf_for(x.features);
    CHECK(std::max_element(leaf.counts.begin(), leaf.counts.end()) - leaf.counts.begin() == code(x.label));
  }
}

TEST_CASE("same rng seed gives the same tree") {
  Rng data_rng(3);
  std::vector<LabeledSample> s;
  for (int k = 0; k < 60; ++k) {
    std::vector<double> x(6);
    for (double& v : x) v = data_rng.uniform();
    s.push_back(sample(x, static_cast<int>(data_rng.index(8))));
  }
  const TrainingView v = TrainingView::of(s);
  const auto rows = all_rows(v);
  Rng a(9), b(9);
  const DecisionTree ta = tree_fit(v, rows, 5, 2, a);
  const DecisionTree tb = tree_fit(v, rows, 5, 2, b);
  CHECK(ta == tb);
  CHECK(ta.depth() <= 5);
}

TEST_CASE("forest construction") {
  Rng data_rng(4);
  std::vector<LabeledSample> s;
  for (int k = 0; k < 500; ++k) {
    std::vector<double> x(9);
    for (double& v : x) v = data_rng.uniform();
    const int label = x[0] > 0.5 ? 2 : (x[3] > 0.3 ? 5 : 0);
    s.push_back(sample(x, label, static_cast<std::uint64_t>(k)));
  }
  RfConfig cfg;
  cfg.seed = 12;
  const RandomForestModel m = rf_fit(s, cfg);
  CHECK(m.trees.size() == 100);
  CHECK(m.features_per_split == 3);
  for (const auto& t : m.trees) CHECK(t.depth() <= 5);

  double oob = 0.0;
  for (const auto& o : m.oob_indices) oob += static_cast<double>(o.size()) / 500.0;
  oob /= static_cast<double>(m.oob_indices.size());
  CHECK(oob > 0.30);
  CHECK(oob < 0.44);

  int correct = 0;
  for (const auto& x : s) {
    const auto p = rf_predict_proba(m, x.features);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    correct += rf_predict(m, x.features) == x.label;
  }
  CHECK(correct > 450);

  const auto imp = feature_importances(m);
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(imp[0] > imp[1]);
  CHECK(imp[3] > imp[8]);

  cfg.threads = 3;
  CHECK(rf_fit(s, cfg).trees == m.trees);

  std::vector<LabeledSample> reversed(s.rbegin(), s.rend());
  cfg.threads = 1;
  const RandomForestModel r = rf_fit(reversed, cfg);
  CHECK(r.trees == m.trees);
  CHECK(r.oob_indices == m.oob_indices);

  CHECK_THROWS_AS(rf_predict(m, std::vector<double>(8, 0.0)), InputError);
}

TEST_CASE("degenerate forest equals a single tree") {
  Rng data_rng(5);
  std::vector<LabeledSample> s;
  for (int k = 0; k < 40; ++k) {
    std::vector<double> x(4);
    for (double& v : x) v = data_rng.uniform();
    s.push_back(sample(x, static_cast<int>(data_rng.index(3)), static_cast<std::uint64_t>(k)));
  }
  RfConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.seed = 8;
  const RandomForestModel m = rf_fit(s, cfg);
  const TrainingView v = TrainingView::of(s);
  Rng rng(forest_tree_seed(8, 0));
  CHECK(m.trees[0] == tree_fit(v, all_rows(v), 5, 2, rng));
  CHECK(m.oob_indices[0].empty());
}

TEST_CASE("vote tie goes to the lowest code") {
  RandomForestModel m;
  m.num_features = 1;
  TreeNode l3;
  l3.counts[3] = 4;
  TreeNode l5;
  l5.counts[5] = 4;
  m.trees = {DecisionTree{{l5}}, DecisionTree{{l3}}};
  CHECK(rf_predict(m, std::vector<double>{0.0}) == FaultLabel::TxPower);
  const auto p = rf_predict_proba(m, std::vector<double>{0.0});
  CHECK(p[3] == 0.5);
  CHECK(p[5] == 0.5);

  TreeNode tie;
  tie.counts[6] = 2;
  tie.counts[1] = 2;
  m.trees = {DecisionTree{{tie}}};
  CHECK(rf_predict(m, std::vector<double>{0.0}) == FaultLabel::CellOutage);
}

TEST_CASE("importances of a single stump and a constant feature") {
  std::vector<LabeledSample> s;
  for (int k = 0; k < 8; ++k) s.push_back(sample({0.5, k / 8.0}, k < 4 ? 0 : 1, static_cast<std::uint64_t>(k)));
  RfConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.features_per_split = 2;
  const RandomForestModel m = rf_fit(s, cfg);
  CHECK(m.trees[0].depth() == 1);
  CHECK(feature_importances(m) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("single-class forest is rejected") {
  std::vector<LabeledSample> s{sample({0.1}, 2), sample({0.2}, 2)};
  CHECK_THROWS_AS(rf_fit(s, RfConfig{}), InputError);
}

TEST_CASE("forest round trips through the binary format") {
  Rng data_rng(6);
  std::vector<LabeledSample> s;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> x(4);
    for (double& v : x) v = data_rng.uniform();
    s.push_back(sample(x, static_cast<int>(data_rng.index(4)), static_cast<std::uint64_t>(k)));
  }
  RfConfig cfg;
  cfg.n_trees = 7;
  const RandomForestModel m = rf_fit(s, cfg);
  BinaryWriter w;
  save(m, w);
  BinaryReader r(w.bytes());
  const RandomForestModel back = load_rf(r);
  r.expect_end();
  CHECK(back.trees == m.trees);
  CHECK(back.oob_indices == m.oob_indices);
  CHECK(back.features_per_split == m.features_per_split);

  std::string broken = w.bytes();
  broken.resize(broken.size() - 3);
  BinaryReader rb(broken);
  CHECK_THROWS_AS(load_rf(rb), FormatError);
}
