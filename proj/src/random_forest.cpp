#include "faultlab/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace faultlab {

double gini(const ClassCounts& counts) {
  long long n = 0;
  for (int c : counts) {
    if (c < 0) throw InputError("gini: negative count");
    n += c;
  }
  if (n == 0) throw InputError("gini: empty node");
  double s = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

TrainingView TrainingView::of(std::span<const LabeledSample> samples) {
  TrainingView v;
  if (!samples.empty()) v.num_features = samples.front().features.size();
  for (const auto& s : samples) {
    if (s.features.size() != v.num_features) throw InputError("inconsistent feature length");
    v.rows.emplace_back(s.features);
    v.labels.push_back(code(s.label));
  }
  return v;
}

namespace {

ClassCounts count_rows(const TrainingView& data, std::span<const std::size_t> rows) {
  ClassCounts c{};
  for (auto r : rows) ++c[static_cast<std::size_t>(data.labels[r])];
  return c;
}

int majority(const ClassCounts& c) {
  return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
}

}  // namespace

std::optional<Split> best_split(const TrainingView& data, std::span<const std::size_t> rows,
                                std::span<const int> candidate_features) {
  if (rows.size() < 2) return std::nullopt;
  const ClassCounts parent = count_rows(data, rows);
  const double parent_gini = gini(parent);
  if (parent_gini == 0.0) return std::nullopt;

  std::vector<int> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());

  const double n = static_cast<double>(rows.size());
  std::optional<Split> best;
  std::vector<std::pair<double, int>> column(rows.size());
  for (int f : features) {
    for (std::size_t k = 0; k < rows.size(); ++k)
      column[k] = {data.rows[rows[k]][static_cast<std::size_t>(f)], data.labels[rows[k]]};
    std::sort(column.begin(), column.end());
    ClassCounts left{};
    ClassCounts right = parent;
    for (std::size_t k = 0; k + 1 < column.size(); ++k) {
      ++left[static_cast<std::size_t>(column[k].second)];
      --right[static_cast<std::size_t>(column[k].second)];
      const double lo = column[k].first;
      const double hi = column[k + 1].first;
      if (lo == hi) continue;
      double threshold = (lo + hi) / 2.0;
      if (!(threshold < hi)) threshold = lo;
      const double n_left = static_cast<double>(k + 1);
      const double n_right = n - n_left;
      const double decrease = parent_gini - (n_left / n) * gini(left) - (n_right / n) * gini(right);
      if (decrease > kMinImpurityDecrease && (!best || decrease > best->impurity_decrease))
        best = Split{f, threshold, decrease};
    }
  }
  return best;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    deepest = std::max(deepest, d[k]);
    if (!nodes[k].is_leaf()) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return deepest;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  std::size_t k = 0;
  while (!nodes[k].is_leaf())
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[k].feature)] <= nodes[k].threshold ? nodes[k].left
                                                                                                   : nodes[k].right);
  return nodes[k];
}

namespace {

class TreeBuilder {
public:
  TreeBuilder(const TrainingView& data, int max_depth, int features_per_split, Rng& rng)
      : data_(data), max_depth_(max_depth), fps_(features_per_split), rng_(rng), perm_(data.num_features) {
    std::iota(perm_.begin(), perm_.end(), 0);
  }

  int build(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    TreeNode node;
    node.counts = count_rows(data_, rows);
    node.n_samples = static_cast<int>(rows.size());

    std::optional<Split> split;
    if (depth < max_depth_ && rows.size() >= 2 && gini(node.counts) > 0.0) split = best_split(data_, rows, draw());
    if (split) {
      std::vector<std::size_t> left, right;
      for (auto r : rows)
        (data_.rows[r][static_cast<std::size_t>(split->feature)] <= split->threshold ? left : right).push_back(r);
      node.feature = split->feature;
      node.threshold = split->threshold;
      node.impurity_decrease = split->impurity_decrease;
      rows.clear();
      rows.shrink_to_fit();
      node.left = build(std::move(left), depth + 1);
      node.right = build(std::move(right), depth + 1);
    }
    tree_.nodes[static_cast<std::size_t>(id)] = node;
    return id;
  }

  DecisionTree take() { return std::move(tree_); }

private:
  // Partial Fisher-Yates over a persistent permutation.
  std::vector<int> draw() {
    const std::size_t d = perm_.size();
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(fps_), d);
    for (std::size_t k = 0; k < m; ++k) std::swap(perm_[k], perm_[k + rng_.index(d - k)]);
    return std::vector<int>(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(m));
  }

  const TrainingView& data_;
  int max_depth_;
  int fps_;
  Rng& rng_;
  std::vector<int> perm_;
  DecisionTree tree_;
};

bool provenance_less(const LabeledSample& a, const LabeledSample& b) {
  const auto& p = a.provenance;
  const auto& q = b.provenance;
  auto key = [](const FaultInstance& f) {
    return std::tuple(f.sample_seed, code(f.label), f.target_site, f.target_sector, f.parameter_value);
  };
  if (key(p) != key(q)) return key(p) < key(q);
  if (a.label != b.label) return code(a.label) < code(b.label);
  return a.features < b.features;
}

}  // namespace

DecisionTree tree_fit(const TrainingView& data, std::span<const std::size_t> rows, int max_depth,
                      int features_per_split, Rng& rng) {
  if (rows.empty()) throw InputError("tree_fit: no samples");
  if (max_depth < 0) throw InputError("tree_fit: max_depth must be >= 0");
  if (features_per_split < 1 || static_cast<std::size_t>(features_per_split) > data.num_features)
    throw InputError("tree_fit: features_per_split out of range");
  TreeBuilder b(data, max_depth, features_per_split, rng);
  b.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
  return b.take();
}

std::uint64_t forest_tree_seed(std::uint64_t seed, int t) {
  return derive_seed(seed, stream::kForestTree, static_cast<std::uint64_t>(t));
}

RandomForestModel rf_fit(std::span<const LabeledSample> train, const RfConfig& config) {
  if (train.empty()) throw InputError("rf_fit: empty training set");
  if (config.n_trees < 1) throw InputError("rf_fit: n_trees must be >= 1");

  std::vector<const LabeledSample*> order;
  for (const auto& s : train) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const LabeledSample* a, const LabeledSample* b) { return provenance_less(*a, *b); });
  TrainingView data;
  data.num_features = train.front().features.size();
  ClassCounts present{};
  for (const auto* s : order) {
    if (s->features.size() != data.num_features) throw InputError("rf_fit: inconsistent feature length");
    data.rows.emplace_back(s->features);
    data.labels.push_back(code(s->label));
    present[static_cast<std::size_t>(code(s->label))] = 1;
  }
  if (std::accumulate(present.begin(), present.end(), 0) < 2)
    throw InputError("rf_fit: training set must contain at least 2 classes");

  RandomForestModel m;
  m.num_features = data.num_features;
  m.max_depth = config.max_depth;
  m.seed = config.seed;
  m.features_per_split = config.features_per_split > 0
                             ? config.features_per_split
                             : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(m.num_features)))));
  if (static_cast<std::size_t>(m.features_per_split) > m.num_features)
    throw InputError("rf_fit: features_per_split exceeds feature count");

  const std::size_t n = data.rows.size();
  m.trees.resize(static_cast<std::size_t>(config.n_trees));
  m.oob_indices.resize(static_cast<std::size_t>(config.n_trees));
  parallel_for(m.trees.size(), config.threads, [&](std::size_t t) {
    std::vector<std::size_t> rows(n);
    std::vector<char> in_bag(n, 0);
    if (config.bootstrap) {
      Rng boot(derive_seed(config.seed, stream::kForestBootstrap, t));
      for (auto& r : rows) {
        r = boot.index(n);
        in_bag[r] = 1;
      }
    } else {
      std::iota(rows.begin(), rows.end(), 0);
      std::fill(in_bag.begin(), in_bag.end(), 1);
    }
    for (std::size_t k = 0; k < n; ++k)
      if (!in_bag[k]) m.oob_indices[t].push_back(static_cast<std::uint32_t>(k));
    Rng rng(forest_tree_seed(config.seed, static_cast<int>(t)));
    m.trees[t] = tree_fit(data, rows, m.max_depth, m.features_per_split, rng);
  });
  return m;
}

std::array<double, 8> rf_predict_proba(const RandomForestModel& m, std::span<const double> x) {
  if (x.size() != m.num_features) throw InputError("rf: feature dimension mismatch");
  std::array<double, 8> votes{};
  for (const auto& tree : m.trees) votes[static_cast<std::size_t>(majority(tree.leaf_for(x).counts))] += 1.0;
  for (double& v : votes) v /= static_cast<double>(m.trees.size());
  return votes;
}

FaultLabel rf_predict(const RandomForestModel& m, std::span<const double> x) {
  const auto p = rf_predict_proba(m, x);
  return label_from_code(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
}

std::vector<double> feature_importances(const RandomForestModel& m) {
  std::vector<double> imp(m.num_features, 0.0);
  for (const auto& tree : m.trees) {
    const double n_root = tree.nodes.front().n_samples;
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) imp[static_cast<std::size_t>(node.feature)] += node.n_samples / n_root * node.impurity_decrease;
  }
  double total = 0.0;
  for (double& v : imp) {
    v /= static_cast<double>(m.trees.size());
    total += v;
  }
  if (total > 0.0)
    for (double& v : imp) v /= total;
  return imp;
}

namespace {

void write_node(const DecisionTree& t, int k, BinaryWriter& w) {
  const TreeNode& n = t.nodes[static_cast<std::size_t>(k)];
  w.u8(n.is_leaf() ? 1 : 0);
  for (int c : n.counts) w.i32(c);
  w.i32(n.n_samples);
  if (n.is_leaf()) return;
  w.i32(n.feature);
  w.f64(n.threshold);
  w.f64(n.impurity_decrease);
  write_node(t, n.left, w);
  write_node(t, n.right, w);
}

int read_node(DecisionTree& t, BinaryReader& r, std::size_t num_features, int depth) {
  if (depth > 64) throw FormatError("tree too deep", r.offset());
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  TreeNode n;
  const std::size_t at = r.offset();
  const auto leaf = r.u8();
  if (leaf > 1) throw FormatError("bad node tag", at);
  for (int& c : n.counts) c = r.i32();
  n.n_samples = r.i32();
  if (!leaf) {
    const std::size_t fat = r.offset();
    n.feature = r.i32();
    if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= num_features)
      throw FormatError("split feature out of range", fat);
    n.threshold = r.f64();
    n.impurity_decrease = r.f64();
    n.left = read_node(t, r, num_features, depth + 1);
    n.right = read_node(t, r, num_features, depth + 1);
  }
  t.nodes[static_cast<std::size_t>(id)] = n;
  return id;
}

}  // namespace

void save(const RandomForestModel& m, BinaryWriter& w) {
  w.u64(m.num_features);
  w.i32(m.features_per_split);
  w.i32(m.max_depth);
  w.u64(m.seed);
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    w.u32(static_cast<std::uint32_t>(m.oob_indices[t].size()));
    for (auto k : m.oob_indices[t]) w.u32(k);
    write_node(m.trees[t], 0, w);
  }
}

RandomForestModel load_rf(BinaryReader& r) {
  RandomForestModel m;
  m.num_features = r.u64();
  m.features_per_split = r.i32();
  m.max_depth = r.i32();
  m.seed = r.u64();
  const std::uint32_t n_trees = r.u32();
  m.trees.resize(n_trees);
  m.oob_indices.resize(n_trees);
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    const std::uint32_t n_oob = r.u32();
    for (std::uint32_t k = 0; k < n_oob; ++k) m.oob_indices[t].push_back(r.u32());
    read_node(m.trees[t], r, m.num_features, 0);
  }
  return m;
}

}  // namespace faultlab
