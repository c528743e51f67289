#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "faultlab/binary_io.hpp"
#include "faultlab/common.hpp"
#include "faultlab/imaging.hpp"

namespace faultlab {

using ClassCounts = std::array<int, 8>;

/// 1 - sum_k (c_k / n)^2.
double gini(const ClassCounts& counts);

/// Row-oriented view of a training set used by the tree builder.
struct TrainingView {
  std::size_t num_features = 0;
  std::vector<std::span<const double>> rows;
  std::vector<int> labels;

  static TrainingView of(std::span<const LabeledSample> samples);
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
  bool operator==(const Split&) const = default;
};

/// Splits whose weighted Gini decrease does not exceed this are rejected.
inline constexpr double kMinImpurityDecrease = 1e-12;

/// Best weighted-Gini split over the candidate features (visited in ascending
/// order) at midpoints between consecutive distinct values. Ties keep the
/// lowest feature, then the lowest threshold.
std::optional<Split> best_split(const TrainingView& data, std::span<const std::size_t> rows,
                                std::span<const int> candidate_features);

/// Flat preorder tree. Leaves have feature == -1; every node keeps its class
/// counts so impurity-based importances can be recomputed.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  ClassCounts counts{};
  int n_samples = 0;
  double impurity_decrease = 0.0;
  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int depth() const;
  const TreeNode& leaf_for(std::span<const double> x) const;
  bool operator==(const DecisionTree&) const = default;
};

DecisionTree tree_fit(const TrainingView& data, std::span<const std::size_t> rows, int max_depth,
                      int features_per_split, Rng& rng);

struct RfConfig {
  int n_trees = 100;
  int max_depth = 5;
  int features_per_split = 0;  // 0: round(sqrt(num_features))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  int features_per_split = 0;
  int max_depth = 0;
  std::size_t num_features = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint32_t>> oob_indices;  // positions in canonical training order
};

/// Seed of tree t's feature-draw stream.
std::uint64_t forest_tree_seed(std::uint64_t seed, int t);

/// Training samples are first put in canonical provenance order, so the
/// model does not depend on the order they are passed in.
RandomForestModel rf_fit(std::span<const LabeledSample> train, const RfConfig& config);

std::array<double, 8> rf_predict_proba(const RandomForestModel& model, std::span<const double> x);
FaultLabel rf_predict(const RandomForestModel& model, std::span<const double> x);

/// Mean decrease in impurity, averaged over trees and normalized to sum 1.
std::vector<double> feature_importances(const RandomForestModel& model);

void save(const RandomForestModel& model, BinaryWriter& w);
RandomForestModel load_rf(BinaryReader& r);

}  // namespace faultlab
