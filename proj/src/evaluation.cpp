#include "faultlab/evaluation.hpp"

#include <cstdio>
#include <ostream>

#include "faultlab/common.hpp"

namespace faultlab {

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts)
    for (long long c : row) t += c;
  return t;
}

long long ConfusionMatrix::row_total(int k) const {
  long long t = 0;
  for (long long c : counts[static_cast<std::size_t>(k)]) t += c;
  return t;
}

long long ConfusionMatrix::col_total(int k) const {
  long long t = 0;
  for (const auto& row : counts) t += row[static_cast<std::size_t>(k)];
  return t;
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (std::size_t k = 0; k < 8; ++k) t += counts[k][k];
  return t;
}

ConfusionMatrix confusion(std::span<const FaultLabel> truth, std::span<const FaultLabel> predicted) {
  if (truth.size() != predicted.size()) throw InputError("confusion: label sequences differ in length");
  if (truth.empty()) throw InputError("confusion: no samples");
  ConfusionMatrix cm;
  for (std::size_t k = 0; k < truth.size(); ++k)
    ++cm.counts[static_cast<std::size_t>(code(truth[k]))][static_cast<std::size_t>(code(predicted[k]))];
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const long long n = cm.total();
  if (n == 0) throw InputError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

double cohen_kappa(const ConfusionMatrix& cm) {
  const long long n = cm.total();
  if (n == 0) throw InputError("cohen_kappa: empty confusion matrix");
  const double nd = static_cast<double>(n);
  const double p_o = static_cast<double>(cm.trace()) / nd;
  long long chance = 0;
  for (int k = 0; k < 8; ++k) chance += cm.row_total(k) * cm.col_total(k);
  const double p_e = static_cast<double>(chance) / (nd * nd);
  if (chance == n * n) return cm.trace() == n ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

PerClassAccuracy per_class_accuracy(const ConfusionMatrix& cm) {
  PerClassAccuracy r;
  for (int k = 0; k < 8; ++k) {
    const long long row = cm.row_total(k);
    const auto uk = static_cast<std::size_t>(k);
    r.empty_row[uk] = row == 0;
    r.value[uk] = row == 0 ? 0.0 : static_cast<double>(cm.counts[uk][uk]) / static_cast<double>(row);
  }
  return r;
}

EvaluationReport make_report(std::string model, ColorMode color, std::span<const FaultLabel> truth,
                             std::span<const FaultLabel> predicted) {
  EvaluationReport r;
  r.model = std::move(model);
  r.color = color;
  r.confusion = confusion(truth, predicted);
  r.accuracy = accuracy(r.confusion);
  r.kappa = cohen_kappa(r.confusion);
  r.per_class = per_class_accuracy(r.confusion);
  return r;
}

std::string_view color_name(ColorMode c) { return c == ColorMode::Gray ? "gray" : "rgb"; }

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_report_header(std::ostream& out) {
  out << "model,color_mode,accuracy,kappa";
  for (int k = 0; k < 8; ++k) out << ",pca_" << k;
  out << '\n';
}

void write_report_row(const EvaluationReport& r, std::ostream& out) {
  out << r.model << ',' << color_name(r.color) << ',' << format_real(r.accuracy) << ',' << format_real(r.kappa);
  for (double v : r.per_class.value) out << ',' << format_real(v);
  out << '\n';
}

void write_confusion(const ConfusionMatrix& cm, std::ostream& out) {
  for (const auto& row : cm.counts) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
}

}  // namespace faultlab
