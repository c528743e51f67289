#pragma once

#include <array>
#include <span>
#include <vector>

#include "faultlab/binary_io.hpp"
#include "faultlab/imaging.hpp"

namespace faultlab {

/// Gaussian Naive Bayes with per-class, per-feature ML mean and variance.
struct GaussianNbModel {
  std::array<double, 8> class_log_priors{};  // -inf for classes absent from training
  std::vector<double> means;                 // class-major: means[c * num_features + i]
  std::vector<double> variances;             // same layout, each >= variance_floor
  std::size_t num_features = 0;
  double variance_floor = 0.0;

  bool present(int c) const { return class_log_priors[static_cast<std::size_t>(c)] > -1e300; }
};

GaussianNbModel nb_fit(std::span<const LabeledSample> train);

/// log P(y) + sum_i log N(x_i; mu_y,i, var_y,i) per class; the evidence term is dropped.
std::array<double, 8> nb_log_posterior(const GaussianNbModel& model, std::span<const double> x);

/// MAP class; ties go to the lowest code.
FaultLabel nb_predict(const GaussianNbModel& model, std::span<const double> x);

void save(const GaussianNbModel& model, BinaryWriter& w);
GaussianNbModel load_nb(BinaryReader& r);

/// argmax with lowest-index tie-break, shared by every classifier.
int argmax_lowest(std::span<const double> scores);

}  // namespace faultlab
