#include "faultlab/naive_bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "faultlab/common.hpp"

namespace faultlab {

int argmax_lowest(std::span<const double> scores) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(scores.size()); ++k)
    if (scores[static_cast<std::size_t>(k)] > scores[static_cast<std::size_t>(best)]) best = k;
  return best;
}

GaussianNbModel nb_fit(std::span<const LabeledSample> train) {
  if (train.empty()) throw InputError("nb_fit: empty training set");
  const std::size_t d = train.front().features.size();
  std::array<std::size_t, 8> counts{};
  for (const auto& s : train) {
    if (s.features.size() != d) throw InputError("nb_fit: inconsistent feature length");
    ++counts[static_cast<std::size_t>(code(s.label))];
  }
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw InputError("nb_fit: training set must contain at least 2 classes");

  GaussianNbModel m;
  m.num_features = d;
  m.means.assign(kNumClasses * d, 0.0);
  m.variances.assign(kNumClasses * d, 0.0);

  for (const auto& s : train) {
    double* mu = &m.means[static_cast<std::size_t>(code(s.label)) * d];
    for (std::size_t i = 0; i < d; ++i) mu[i] += s.features[i];
  }
  for (int c = 0; c < kNumClasses; ++c) {
    const auto n = counts[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    double* mu = &m.means[static_cast<std::size_t>(c) * d];
    for (std::size_t i = 0; i < d; ++i) mu[i] /= static_cast<double>(n);
  }
  for (const auto& s : train) {
    const std::size_t off = static_cast<std::size_t>(code(s.label)) * d;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = s.features[i] - m.means[off + i];
      m.variances[off + i] += e * e;
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    const auto n = counts[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    double* var = &m.variances[static_cast<std::size_t>(c) * d];
    for (std::size_t i = 0; i < d; ++i) var[i] /= static_cast<double>(n);
  }

  // Floor: 1e-9 of the largest pooled (all-class) feature variance.
  double max_global_var = 0.0;
  const double n_total = static_cast<double>(train.size());
  for (std::size_t i = 0; i < d; ++i) {
    double mean = 0.0;
    for (const auto& s : train) mean += s.features[i];
    mean /= n_total;
    double var = 0.0;
    for (const auto& s : train) var += (s.features[i] - mean) * (s.features[i] - mean);
    max_global_var = std::max(max_global_var, var / n_total);
  }
  m.variance_floor = max_global_var > 0.0 ? 1e-9 * max_global_var : 1e-9;
  for (double& v : m.variances) v = std::max(v, m.variance_floor);

  for (int c = 0; c < kNumClasses; ++c) {
    const auto n = counts[static_cast<std::size_t>(c)];
    m.class_log_priors[static_cast<std::size_t>(c)] =
        n == 0 ? -std::numeric_limits<double>::infinity() : std::log(static_cast<double>(n) / n_total);
  }
  return m;
}

std::array<double, 8> nb_log_posterior(const GaussianNbModel& m, std::span<const double> x) {
  if (x.size() != m.num_features) throw InputError("nb: feature dimension mismatch");
  std::array<double, 8> out{};
  const std::size_t d = m.num_features;
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (int c = 0; c < kNumClasses; ++c) {
    double score = m.class_log_priors[static_cast<std::size_t>(c)];
    if (!m.present(c)) {
      out[static_cast<std::size_t>(c)] = score;
      continue;
    }
    const double* mu = &m.means[static_cast<std::size_t>(c) * d];
    const double* var = &m.variances[static_cast<std::size_t>(c) * d];
    for (std::size_t i = 0; i < d; ++i) {
      const double e = x[i] - mu[i];
      score += -0.5 * (log_2pi + std::log(var[i])) - e * e / (2.0 * var[i]);
    }
    out[static_cast<std::size_t>(c)] = score;
  }
  return out;
}

FaultLabel nb_predict(const GaussianNbModel& m, std::span<const double> x) {
  const auto scores = nb_log_posterior(m, x);
  return label_from_code(argmax_lowest(scores));
}

void save(const GaussianNbModel& m, BinaryWriter& w) {
  w.u64(m.num_features);
  w.f64(m.variance_floor);
  for (double p : m.class_log_priors) w.f64(p);
  w.f64s(m.means);
  w.f64s(m.variances);
}

GaussianNbModel load_nb(BinaryReader& r) {
  GaussianNbModel m;
  m.num_features = r.u64();
  m.variance_floor = r.f64();
  for (double& p : m.class_log_priors) p = r.f64();
  const std::size_t at = r.offset();
  m.means = r.f64s();
  m.variances = r.f64s();
  if (m.means.size() != kNumClasses * m.num_features || m.variances.size() != m.means.size())
    throw FormatError("NB parameter block has wrong size", at);
  return m;
}

}  // namespace faultlab
