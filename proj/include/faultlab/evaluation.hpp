#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faultlab/faults.hpp"
#include "faultlab/imaging.hpp"

namespace faultlab {

/// counts[true][predicted]
struct ConfusionMatrix {
  std::array<std::array<long long, 8>, 8> counts{};
  long long total() const;
  long long row_total(int k) const;
  long long col_total(int k) const;
  long long trace() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const FaultLabel> truth, std::span<const FaultLabel> predicted);

double accuracy(const ConfusionMatrix& cm);

/// (p_o - p_e) / (1 - p_e); when p_e == 1 returns 1 if p_o == 1, else 0.
double cohen_kappa(const ConfusionMatrix& cm);

struct PerClassAccuracy {
  std::array<double, 8> value{};
  std::array<bool, 8> empty_row{};
};
PerClassAccuracy per_class_accuracy(const ConfusionMatrix& cm);

struct EvaluationReport {
  std::string model;
  ColorMode color = ColorMode::Gray;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double kappa = 0.0;
  PerClassAccuracy per_class;
  std::optional<std::vector<double>> loss_history;
};

EvaluationReport make_report(std::string model, ColorMode color, std::span<const FaultLabel> truth,
                             std::span<const FaultLabel> predicted);

std::string_view color_name(ColorMode c);

/// Header: model,color_mode,accuracy,kappa,pca_0..pca_7
void write_report_header(std::ostream& out);
void write_report_row(const EvaluationReport& r, std::ostream& out);
/// 8 rows of 8 comma-separated counts.
void write_confusion(const ConfusionMatrix& cm, std::ostream& out);

/// Fixed-precision decimal used in every CSV (round-trippable: %.17g).
std::string format_real(double v);

}  // namespace faultlab
