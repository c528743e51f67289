#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "faultlab/binary_io.hpp"
#include "faultlab/imaging.hpp"

namespace faultlab {

/// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  bool operator==(const Matrix&) const = default;
};

/// Solves S X = B for symmetric positive-definite S via Cholesky.
Matrix cholesky_solve(Matrix s, const Matrix& b);

struct LifParams {
  double tau_rc = 0.02;
  double tau_ref = 0.002;
};

/// Steady-state LIF firing rate in Hz; 0 for J <= 1.
double lif_rate(double current, const LifParams& p = {});

/// Input current at which a neuron fires at max_rate Hz.
double current_for_rate(double max_rate, const LifParams& p = {});

struct Ensemble {
  int n_neurons = 0;
  int dim = 0;
  Matrix encoders;  // n_neurons x dim, unit rows
  std::vector<double> gains;
  std::vector<double> biases;
  std::vector<double> max_rates;
  std::vector<double> intercepts;
  LifParams lif;
};

struct EnsembleParams {
  int n_neurons = 100;
  int dim = 1;
  double max_rate_lo = 200.0;
  double max_rate_hi = 400.0;
  double intercept_lo = -0.95;
  double intercept_hi = 0.95;
  LifParams lif;
  std::uint64_t seed = 0;
};

/// Samples encoders, max rates and intercepts, then fits gains and biases.
Ensemble make_ensemble(const EnsembleParams& params);

/// Per neuron: gain + bias = J_max and gain * intercept + bias = 1.
std::pair<std::vector<double>, std::vector<double>> solve_gain_bias(const Ensemble& ensemble);

std::vector<double> rates(const Ensemble& ensemble, std::span<const double> x);

/// Activity matrix (n_eval x n_neurons) at each row of eval_points.
Matrix activities(const Ensemble& ensemble, const Matrix& eval_points, unsigned threads = 1);

/// Ridge-regularized least squares: (A^T A + lambda I) D = A^T targets with
/// lambda = (reg * max(A))^2 * n_eval.
Matrix solve_decoders(const Ensemble& ensemble, const Matrix& eval_points, const Matrix& targets, double reg,
                      unsigned threads = 1);

/// rates(x) . D
std::vector<double> decode(const Ensemble& ensemble, const Matrix& decoders, std::span<const double> x);

// Object model: constant-output nodes, ensembles, weighted connections and probes.

struct Node {
  std::vector<double> output;
};

enum class ObjectKind { Node, Ensemble };

struct ObjectRef {
  ObjectKind kind = ObjectKind::Node;
  int index = 0;
};

/// Node -> Ensemble connections carry a transform (ensemble.dim x node.dim).
/// Ensemble -> Node connections carry decoders (n_neurons x node.dim) and are
/// low-pass filtered with synapse_tau in spiking mode.
struct Connection {
  ObjectRef source;
  ObjectRef target;
  Matrix weights;
  double synapse_tau = 0.005;
};

/// Records the filtered output of a decoded connection.
struct Probe {
  int connection = 0;
  double sample_period = 0.001;
  std::vector<double> times;
  std::vector<std::vector<double>> samples;
};

struct Network {
  std::vector<Node> nodes;
  std::vector<Ensemble> ensembles;
  std::vector<Connection> connections;
  std::vector<Probe> probes;
};

struct SpikingResult {
  std::vector<double> times;
  std::vector<std::vector<double>> decoded;  // per step, filtered output of the first decoded connection
  std::vector<double> mean_last_half;        // time average over [T/2, T)
  std::vector<std::vector<int>> spike_counts;  // per ensemble, per neuron
};

/// Euler-integrated LIF dynamics: dV/dt = (J - V) / tau_rc; a spike resets V
/// to 0 and holds it for round(tau_ref / dt) steps. Fills the network's probes.
SpikingResult simulate_spiking(Network& net, double dt = 0.001, double duration = 0.2);

/// Steady-state (rate-mode) output of a decoded connection.
std::vector<double> rate_output(const Network& net, int connection);

struct NefConfig {
  int dim = 32;
  int n_neurons = 800;
  double reg = 0.1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct NefClassifier {
  Matrix projection;  // dim x num_features, entries +-1/sqrt(num_features)
  std::vector<double> proj_min;
  std::vector<double> proj_max;
  Ensemble ensemble;
  Matrix decoders;  // n_neurons x 8
  std::size_t num_features = 0;

  /// Projected and rescaled encoder input for a flattened sample.
  std::vector<double> encode_input(std::span<const double> features) const;
  /// Input node -> ensemble -> output node, with a probe on the decoded output.
  Network network(std::span<const double> features, double probe_period = 0.001) const;
};

NefClassifier nef_fit_classifier(std::span<const LabeledSample> train, const NefConfig& config);
std::vector<double> nef_scores(const NefClassifier& model, std::span<const double> features);
FaultLabel nef_predict_rate(const NefClassifier& model, std::span<const double> features);

struct SpikingPrediction {
  FaultLabel label = FaultLabel::Normal;
  SpikingResult result;
  Probe probe;
};
SpikingPrediction nef_predict_spiking(const NefClassifier& model, std::span<const double> features,
                                      double dt = 0.001, double duration = 0.2);

void save(const NefClassifier& model, BinaryWriter& w);
NefClassifier load_nef(BinaryReader& r);

}  // namespace faultlab
