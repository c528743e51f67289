#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "faultlab/binary_io.hpp"
#include "faultlab/cnn.hpp"
#include "faultlab/config.hpp"
#include "faultlab/evaluation.hpp"
#include "faultlab/naive_bayes.hpp"
#include "faultlab/nef.hpp"
#include "faultlab/random_forest.hpp"

namespace faultlab {

enum class ModelKind { NaiveBayes, RandomForest, Cnn, Nef };
inline constexpr ModelKind kAllModels[] = {ModelKind::NaiveBayes, ModelKind::RandomForest, ModelKind::Cnn,
                                           ModelKind::Nef};

std::string_view model_name(ModelKind kind);  // nb, rf, cnn, nef
std::optional<ModelKind> model_from_name(std::string_view name);
std::optional<ColorMode> color_from_name(std::string_view name);

struct ManifestRow {
  int sample_id = 0;
  FaultInstance fault;
  std::string gray_path;  // relative to the run directory
  std::string rgb_path;
};

std::string manifest_csv(std::span<const ManifestRow> rows);
/// Throws InputError("manifest.csv line N: ...") on malformed rows.
std::vector<ManifestRow> parse_manifest(const std::string& text);

struct Dataset {
  std::string run_dir;
  std::vector<ManifestRow> rows;
  std::uint64_t manifest_hash = 0;
};

Dataset load_dataset(const std::string& run_dir);
/// Reads each sample's image for the color mode and flattens it to [0, 1].
std::vector<LabeledSample> load_samples(const Dataset& dataset, ColorMode mode);

struct TrainedModel {
  ModelHeader header;
  std::variant<GaussianNbModel, RandomForestModel, CnnModel, NefClassifier> model;
  ModelKind kind() const;
  ColorMode color() const;
};

TrainedModel fit_model(ModelKind kind, ColorMode mode, std::span<const LabeledSample> train, const RunConfig& config,
                       std::uint64_t manifest_hash);
std::vector<FaultLabel> predict_all(const TrainedModel& model, std::span<const LabeledSample> samples,
                                    unsigned threads);
std::string encode_model(const TrainedModel& model);
TrainedModel decode_model(const std::string& bytes);

/// The stratified split every command shares.
SplitIndices dataset_split(const Dataset& dataset, const RunConfig& config);

/// Writes images/, manifest.csv. Returns the number of samples.
std::size_t cmd_generate(const RunConfig& config, const std::string& run_dir);

/// Writes models/<model>_<color>.bin and returns its path.
std::string cmd_train(const RunConfig& config, const std::string& run_dir, ModelKind kind, ColorMode mode);

enum class EvalSplit { Test, Train };

/// Writes reports/<model>_<color>_<split>.csv and the matching _confusion.csv.
/// Throws InputError when the model was trained on another manifest or split.
EvaluationReport cmd_evaluate(const RunConfig& config, const std::string& run_dir, ModelKind kind, ColorMode mode,
                              EvalSplit split = EvalSplit::Test, bool allow_train = false);

/// Trains and evaluates every model in every configured color mode on one
/// split; writes compare/ (accuracy table, RF per-fault table, CNN loss
/// history, NEF probe trace, confusions, models).
std::vector<EvaluationReport> cmd_compare(const RunConfig& config, const std::string& run_dir);

struct GradcheckResult {
  double cnn_max_rel_error = 0.0;
  double nef_identity_rmse = 0.0;
  bool passed() const { return cnn_max_rel_error <= 1e-4 && nef_identity_rmse <= 0.05; }
};
GradcheckResult cmd_gradcheck(std::uint64_t seed = 1);

/// Tuning-curve identity decode over 500 points in [-1, 1] with 100 neurons, reg 0.1.
double nef_identity_rmse(std::uint64_t seed);

}  // namespace faultlab
