#include "faultlab/nef.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "faultlab/common.hpp"
#include "faultlab/naive_bayes.hpp"

namespace faultlab {

Matrix cholesky_solve(Matrix s, const Matrix& b) {
  const int n = s.rows;
  if (s.cols != n || b.rows != n) throw InputError("cholesky_solve: dimension mismatch");
  // In-place lower factor.
  for (int j = 0; j < n; ++j) {
    double d = s(j, j);
    for (int k = 0; k < j; ++k) d -= s(j, k) * s(j, k);
    if (!(d > 0.0)) throw InputError("cholesky_solve: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    s(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double v = s(i, j);
      const double* ri = &s.data[static_cast<std::size_t>(i) * n];
      const double* rj = &s.data[static_cast<std::size_t>(j) * n];
      for (int k = 0; k < j; ++k) v -= ri[k] * rj[k];
      s(i, j) = v / ljj;
    }
  }
  Matrix x = b;
  for (int c = 0; c < b.cols; ++c) {
    for (int i = 0; i < n; ++i) {
      double v = x(i, c);
      for (int k = 0; k < i; ++k) v -= s(i, k) * x(k, c);
      x(i, c) = v / s(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double v = x(i, c);
      for (int k = i + 1; k < n; ++k) v -= s(k, i) * x(k, c);
      x(i, c) = v / s(i, i);
    }
  }
  return x;
}

double lif_rate(double j, const LifParams& p) {
  if (!(j > 1.0)) return 0.0;
  return 1.0 / (p.tau_ref - p.tau_rc * std::log1p(-1.0 / j));
}

double current_for_rate(double max_rate, const LifParams& p) {
  if (!(max_rate > 0.0)) throw InputError("max rate must be positive");
  if (max_rate >= 1.0 / p.tau_ref)
    throw InputError("max rate " + std::to_string(max_rate) + " Hz is unreachable with tau_ref " +
                     std::to_string(p.tau_ref));
  return 1.0 / (1.0 - std::exp((p.tau_ref - 1.0 / max_rate) / p.tau_rc));
}

std::pair<std::vector<double>, std::vector<double>> solve_gain_bias(const Ensemble& e) {
  std::vector<double> gains(static_cast<std::size_t>(e.n_neurons)), biases(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double x0 = e.intercepts[i];
    if (!(x0 < 1.0)) throw InputError("intercept must be < 1");
    const double j_max = current_for_rate(e.max_rates[i], e.lif);
    gains[i] = (j_max - 1.0) / (1.0 - x0);
    biases[i] = 1.0 - gains[i] * x0;
    // Keep the threshold exact: rounding must not lift J(intercept) above 1.
    while (gains[i] * x0 + biases[i] > 1.0) biases[i] = std::nextafter(biases[i], -HUGE_VAL);
  }
  return {gains, biases};
}

Ensemble make_ensemble(const EnsembleParams& p) {
  if (p.n_neurons < 1 || p.dim < 1) throw InputError("ensemble needs >= 1 neuron and >= 1 dimension");
  if (!(p.lif.tau_rc > 0.0 && p.lif.tau_ref > 0.0)) throw InputError("LIF time constants must be > 0");
  Rng rng(derive_seed(p.seed, stream::kNefEnsemble));
  Ensemble e;
  e.n_neurons = p.n_neurons;
  e.dim = p.dim;
  e.lif = p.lif;
  e.encoders = Matrix(p.n_neurons, p.dim);
  for (int i = 0; i < p.n_neurons; ++i) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int d = 0; d < p.dim; ++d) {
        e.encoders(i, d) = rng.normal();
        norm += e.encoders(i, d) * e.encoders(i, d);
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (int d = 0; d < p.dim; ++d) e.encoders(i, d) /= norm;
  }
  for (int i = 0; i < p.n_neurons; ++i) e.max_rates.push_back(rng.uniform(p.max_rate_lo, p.max_rate_hi));
  for (int i = 0; i < p.n_neurons; ++i) e.intercepts.push_back(rng.uniform(p.intercept_lo, p.intercept_hi));
  std::tie(e.gains, e.biases) = solve_gain_bias(e);
  return e;
}

namespace {

std::vector<double> currents(const Ensemble& e, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(e.dim)) throw InputError("ensemble input dimension mismatch");
  std::vector<double> j(static_cast<std::size_t>(e.n_neurons));
  for (int i = 0; i < e.n_neurons; ++i) {
    double dot = 0.0;
    const auto enc = e.encoders.row(i);
    for (int d = 0; d < e.dim; ++d) dot += enc[static_cast<std::size_t>(d)] * x[static_cast<std::size_t>(d)];
    j[static_cast<std::size_t>(i)] = e.gains[static_cast<std::size_t>(i)] * dot + e.biases[static_cast<std::size_t>(i)];
  }
  return j;
}

}  // namespace

std::vector<double> rates(const Ensemble& e, std::span<const double> x) {
  std::vector<double> r = currents(e, x);
  for (double& v : r) v = lif_rate(v, e.lif);
  return r;
}

Matrix activities(const Ensemble& e, const Matrix& eval_points, unsigned threads) {
  if (eval_points.cols != e.dim) throw InputError("eval points dimension mismatch");
  Matrix a(eval_points.rows, e.n_neurons);
  parallel_for(static_cast<std::size_t>(eval_points.rows), threads, [&](std::size_t k) {
    const auto r = rates(e, eval_points.row(static_cast<int>(k)));
    std::copy(r.begin(), r.end(), a.data.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(e.n_neurons)));
  });
  return a;
}

Matrix solve_decoders(const Ensemble& e, const Matrix& eval_points, const Matrix& targets, double reg,
                      unsigned threads) {
  if (eval_points.rows < 2) throw InputError("solve_decoders: need at least 2 eval points");
  if (targets.rows != eval_points.rows) throw InputError("solve_decoders: targets/eval points row mismatch");
  if (reg < 0.0) throw InputError("solve_decoders: reg must be >= 0");
  const Matrix a = activities(e, eval_points, threads);
  const double a_max = *std::max_element(a.data.begin(), a.data.end());
  if (!(a_max > 0.0)) throw InputError("solve_decoders: no neuron is active at any eval point");
  const int n = e.n_neurons, m = a.rows;
  const double lambda = (reg * a_max) * (reg * a_max) * m;

  Matrix gram(n, n);
  Matrix rhs(n, targets.cols);
  // Rows of the Gram matrix are independent; each is reduced in eval-point order.
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ui) {
    const int i = static_cast<int>(ui);
    for (int k = 0; k < m; ++k) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      const auto ak = a.row(k);
      double* g = &gram.data[static_cast<std::size_t>(i) * n];
      for (int j = 0; j <= i; ++j) g[j] += aki * ak[static_cast<std::size_t>(j)];
      for (int c = 0; c < targets.cols; ++c) rhs(i, c) += aki * targets(k, c);
    }
  });
  for (int i = 0; i < n; ++i) {
    gram(i, i) += lambda;
    for (int j = 0; j < i; ++j) gram(j, i) = gram(i, j);
  }
  return cholesky_solve(std::move(gram), rhs);
}

std::vector<double> decode(const Ensemble& e, const Matrix& d, std::span<const double> x) {
  const auto r = rates(e, x);
  std::vector<double> out(static_cast<std::size_t>(d.cols), 0.0);
  for (int i = 0; i < e.n_neurons; ++i) {
    const double ri = r[static_cast<std::size_t>(i)];
    if (ri == 0.0) continue;
    for (int c = 0; c < d.cols; ++c) out[static_cast<std::size_t>(c)] += ri * d(i, c);
  }
  return out;
}

namespace {

void check_topology(const Network& net) {
  for (const auto& c : net.connections) {
    const bool node_to_ens = c.source.kind == ObjectKind::Node && c.target.kind == ObjectKind::Ensemble;
    const bool ens_to_node = c.source.kind == ObjectKind::Ensemble && c.target.kind == ObjectKind::Node;
    if (!node_to_ens && !ens_to_node) throw InputError("network: only node->ensemble and ensemble->node connections");
    const auto ns = static_cast<int>(net.nodes.size()), es = static_cast<int>(net.ensembles.size());
    const int src_n = c.source.kind == ObjectKind::Node ? ns : es;
    const int dst_n = c.target.kind == ObjectKind::Node ? ns : es;
    if (c.source.index < 0 || c.source.index >= src_n || c.target.index < 0 || c.target.index >= dst_n)
      throw InputError("network: connection endpoint out of range");
    if (node_to_ens) {
      const auto& node = net.nodes[static_cast<std::size_t>(c.source.index)];
      const auto& ens = net.ensembles[static_cast<std::size_t>(c.target.index)];
      if (c.weights.rows != ens.dim || c.weights.cols != static_cast<int>(node.output.size()))
        throw InputError("network: transform shape must be ensemble.dim x node.dim");
    } else {
      const auto& ens = net.ensembles[static_cast<std::size_t>(c.source.index)];
      const auto& node = net.nodes[static_cast<std::size_t>(c.target.index)];
      if (c.weights.rows != ens.n_neurons || c.weights.cols != static_cast<int>(node.output.size()))
        throw InputError("network: decoders shape must be n_neurons x node.dim");
      if (!(c.synapse_tau > 0.0)) throw InputError("network: synapse_tau must be > 0");
    }
  }
  for (const auto& a : net.connections) {
    if (a.target.kind != ObjectKind::Node) continue;
    for (const auto& b : net.connections)
      if (b.source.kind == ObjectKind::Node && b.source.index == a.target.index)
        throw InputError("network: a decoded output node cannot also drive an ensemble");
  }
  for (const auto& p : net.probes) {
    if (p.connection < 0 || p.connection >= static_cast<int>(net.connections.size()) ||
        net.connections[static_cast<std::size_t>(p.connection)].source.kind != ObjectKind::Ensemble)
      throw InputError("network: probes must target a decoded (ensemble->node) connection");
  }
}

// Input vector of each ensemble: sum of transformed constant node outputs.
std::vector<std::vector<double>> ensemble_inputs(const Network& net) {
  std::vector<std::vector<double>> in;
  for (const auto& e : net.ensembles) in.emplace_back(static_cast<std::size_t>(e.dim), 0.0);
  for (const auto& c : net.connections) {
    if (c.source.kind != ObjectKind::Node) continue;
    const auto& out = net.nodes[static_cast<std::size_t>(c.source.index)].output;
    auto& x = in[static_cast<std::size_t>(c.target.index)];
    for (int r = 0; r < c.weights.rows; ++r)
      for (int k = 0; k < c.weights.cols; ++k) x[static_cast<std::size_t>(r)] += c.weights(r, k) * out[static_cast<std::size_t>(k)];
  }
  return in;
}

}  // namespace

std::vector<double> rate_output(const Network& net, int connection) {
  check_topology(net);
  const auto& c = net.connections.at(static_cast<std::size_t>(connection));
  if (c.source.kind != ObjectKind::Ensemble) throw InputError("rate_output: connection is not decoded");
  const auto in = ensemble_inputs(net);
  const auto& e = net.ensembles[static_cast<std::size_t>(c.source.index)];
  return decode(e, c.weights, in[static_cast<std::size_t>(c.source.index)]);
}

SpikingResult simulate_spiking(Network& net, double dt, double duration) {
  if (!(dt > 0.0)) throw InputError("simulate_spiking: dt must be > 0");
  if (!(duration >= 50.0 * dt - 1e-12)) throw InputError("simulate_spiking: duration must be >= 50 dt");
  check_topology(net);

  const auto steps = static_cast<long>(std::lround(duration / dt));
  const auto in = ensemble_inputs(net);
  struct NeuronState {
    std::vector<double> current, voltage;
    std::vector<int> hold;
    int hold_steps = 0;
  };
  std::vector<NeuronState> state;
  for (std::size_t k = 0; k < net.ensembles.size(); ++k) {
    const auto& e = net.ensembles[k];
    NeuronState s;
    s.current = currents(e, in[k]);
    s.voltage.assign(static_cast<std::size_t>(e.n_neurons), 0.0);
    s.hold.assign(static_cast<std::size_t>(e.n_neurons), 0);
    s.hold_steps = static_cast<int>(std::lround(e.lif.tau_ref / dt));
    state.push_back(std::move(s));
  }

  std::vector<int> decoded_conns;
  for (int c = 0; c < static_cast<int>(net.connections.size()); ++c)
    if (net.connections[static_cast<std::size_t>(c)].source.kind == ObjectKind::Ensemble) decoded_conns.push_back(c);
  std::vector<std::vector<double>> filtered(net.connections.size());
  for (int c : decoded_conns)
    filtered[static_cast<std::size_t>(c)].assign(static_cast<std::size_t>(net.connections[static_cast<std::size_t>(c)].weights.cols), 0.0);

  std::vector<long> probe_every;
  for (auto& p : net.probes) {
    const double ratio = p.sample_period / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
      throw InputError("probe sample period must be a positive multiple of dt");
    probe_every.push_back(std::lround(ratio));
    p.times.clear();
    p.samples.clear();
  }

  SpikingResult result;
  for (const auto& e : net.ensembles) result.spike_counts.emplace_back(static_cast<std::size_t>(e.n_neurons), 0);
  const std::size_t out_dim = decoded_conns.empty() ? 0 : filtered[static_cast<std::size_t>(decoded_conns.front())].size();
  result.mean_last_half.assign(out_dim, 0.0);
  long averaged = 0;

  std::vector<std::vector<char>> spiked(net.ensembles.size());
  for (long step = 0; step < steps; ++step) {
    for (std::size_t k = 0; k < net.ensembles.size(); ++k) {
      auto& s = state[k];
      const double tau_rc = net.ensembles[k].lif.tau_rc;
      auto& sp = spiked[k];
      sp.assign(s.voltage.size(), 0);
      for (std::size_t i = 0; i < s.voltage.size(); ++i) {
        if (s.hold[i] > 0) {
          --s.hold[i];
          continue;
        }
        s.voltage[i] += dt * (s.current[i] - s.voltage[i]) / tau_rc;
        // Subthreshold currents settle below 1 in continuous time; guard against rounding up to it.
        if (s.current[i] > 1.0 && s.voltage[i] >= 1.0) {
          sp[i] = 1;
          ++result.spike_counts[k][i];
          s.voltage[i] = 0.0;
          s.hold[i] = s.hold_steps;
        }
      }
    }
    for (int c : decoded_conns) {
      const auto& conn = net.connections[static_cast<std::size_t>(c)];
      auto& y = filtered[static_cast<std::size_t>(c)];
      std::vector<double> u(y.size(), 0.0);
      const auto& sp = spiked[static_cast<std::size_t>(conn.source.index)];
      for (std::size_t i = 0; i < sp.size(); ++i) {
        if (!sp[i]) continue;
        for (std::size_t d = 0; d < u.size(); ++d) u[d] += conn.weights(static_cast<int>(i), static_cast<int>(d)) / dt;
      }
      const double a = std::exp(-dt / conn.synapse_tau);
      for (std::size_t d = 0; d < y.size(); ++d) y[d] = a * y[d] + (1.0 - a) * u[d];
      auto& node_out = net.nodes[static_cast<std::size_t>(conn.target.index)].output;
      node_out = y;
    }
    const double t = (step + 1) * dt;
    if (out_dim > 0) {
      const auto& y = filtered[static_cast<std::size_t>(decoded_conns.front())];
      result.times.push_back(t);
      result.decoded.push_back(y);
      if (2 * step >= steps) {
        for (std::size_t d = 0; d < out_dim; ++d) result.mean_last_half[d] += y[d];
        ++averaged;
      }
    }
    for (std::size_t p = 0; p < net.probes.size(); ++p) {
      if ((step + 1) % probe_every[p] != 0) continue;
      net.probes[p].times.push_back(t);
      net.probes[p].samples.push_back(filtered[static_cast<std::size_t>(net.probes[p].connection)]);
    }
  }
  if (averaged > 0)
    for (double& v : result.mean_last_half) v /= static_cast<double>(averaged);
  return result;
}

std::vector<double> NefClassifier::encode_input(std::span<const double> features) const {
  if (features.size() != num_features) throw InputError("nef: feature dimension mismatch");
  std::vector<double> z(static_cast<std::size_t>(projection.rows), 0.0);
  for (int r = 0; r < projection.rows; ++r) {
    const auto row = projection.row(r);
    double acc = 0.0;
    for (std::size_t k = 0; k < num_features; ++k) acc += row[k] * features[k];
    const double lo = proj_min[static_cast<std::size_t>(r)], hi = proj_max[static_cast<std::size_t>(r)];
    z[static_cast<std::size_t>(r)] = hi > lo ? 2.0 * (acc - lo) / (hi - lo) - 1.0 : 0.0;
  }
  return z;
}

Network NefClassifier::network(std::span<const double> features, double probe_period) const {
  Network net;
  net.nodes.push_back({encode_input(features)});
  net.nodes.push_back({std::vector<double>(static_cast<std::size_t>(decoders.cols), 0.0)});
  net.ensembles.push_back(ensemble);
  Matrix identity(ensemble.dim, ensemble.dim);
  for (int d = 0; d < ensemble.dim; ++d) identity(d, d) = 1.0;
  net.connections.push_back({{ObjectKind::Node, 0}, {ObjectKind::Ensemble, 0}, identity, 0.005});
  net.connections.push_back({{ObjectKind::Ensemble, 0}, {ObjectKind::Node, 1}, decoders, 0.005});
  net.probes.push_back({1, probe_period, {}, {}});
  return net;
}

NefClassifier nef_fit_classifier(std::span<const LabeledSample> train, const NefConfig& config) {
  if (train.empty()) throw InputError("nef: empty training set");
  const std::size_t f = train.front().features.size();
  if (config.dim < 1 || static_cast<std::size_t>(config.dim) > f)
    throw InputError("nef: projection dim " + std::to_string(config.dim) + " exceeds feature count " + std::to_string(f));
  for (const auto& s : train)
    if (s.features.size() != f) throw InputError("nef: inconsistent feature length");

  NefClassifier m;
  m.num_features = f;
  m.projection = Matrix(config.dim, static_cast<int>(f));
  Rng rng(derive_seed(config.seed, stream::kNefProjection));
  const double scale = 1.0 / std::sqrt(static_cast<double>(f));
  for (double& v : m.projection.data) v = (rng.next_u64() >> 63) ? scale : -scale;

  // Raw projections first, to find the per-coordinate training range.
  m.proj_min.resize(static_cast<std::size_t>(config.dim));
  m.proj_max.resize(static_cast<std::size_t>(config.dim));
  Matrix raw(static_cast<int>(train.size()), config.dim);
  parallel_for(train.size(), config.threads, [&](std::size_t k) {
    for (int r = 0; r < config.dim; ++r) {
      const auto row = m.projection.row(r);
      double acc = 0.0;
      for (std::size_t q = 0; q < f; ++q) acc += row[q] * train[k].features[q];
      raw(static_cast<int>(k), r) = acc;
    }
  });
  for (int r = 0; r < config.dim; ++r) {
    double lo = raw(0, r), hi = raw(0, r);
    for (int k = 1; k < raw.rows; ++k) {
      lo = std::min(lo, raw(k, r));
      hi = std::max(hi, raw(k, r));
    }
    m.proj_min[static_cast<std::size_t>(r)] = lo;
    m.proj_max[static_cast<std::size_t>(r)] = hi;
  }
  Matrix eval(raw.rows, config.dim);
  for (int k = 0; k < raw.rows; ++k)
    for (int r = 0; r < config.dim; ++r) {
      const double lo = m.proj_min[static_cast<std::size_t>(r)], hi = m.proj_max[static_cast<std::size_t>(r)];
      eval(k, r) = hi > lo ? 2.0 * (raw(k, r) - lo) / (hi - lo) - 1.0 : 0.0;
    }

  EnsembleParams ep;
  ep.n_neurons = config.n_neurons;
  ep.dim = config.dim;
  ep.seed = config.seed;
  m.ensemble = make_ensemble(ep);

  Matrix targets(raw.rows, kNumClasses);
  for (int k = 0; k < raw.rows; ++k) targets(k, code(train[static_cast<std::size_t>(k)].label)) = 1.0;
  m.decoders = solve_decoders(m.ensemble, eval, targets, config.reg, config.threads);
  return m;
}

std::vector<double> nef_scores(const NefClassifier& model, std::span<const double> features) {
  return decode(model.ensemble, model.decoders, model.encode_input(features));
}

FaultLabel nef_predict_rate(const NefClassifier& model, std::span<const double> features) {
  return label_from_code(argmax_lowest(nef_scores(model, features)));
}

SpikingPrediction nef_predict_spiking(const NefClassifier& model, std::span<const double> features, double dt,
                                      double duration) {
  Network net = model.network(features, dt);
  SpikingPrediction p;
  p.result = simulate_spiking(net, dt, duration);
  p.label = label_from_code(argmax_lowest(p.result.mean_last_half));
  p.probe = std::move(net.probes.front());
  return p;
}

namespace {

void write_matrix(const Matrix& m, BinaryWriter& w) {
  w.i32(m.rows);
  w.i32(m.cols);
  w.f64s(m.data);
}

Matrix read_matrix(BinaryReader& r) {
  Matrix m;
  const std::size_t at = r.offset();
  m.rows = r.i32();
  m.cols = r.i32();
  m.data = r.f64s();
  if (m.rows < 0 || m.cols < 0 || m.data.size() != static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols))
    throw FormatError("matrix block has wrong size", at);
  return m;
}

}  // namespace

void save(const NefClassifier& m, BinaryWriter& w) {
  w.u64(m.num_features);
  write_matrix(m.projection, w);
  w.f64s(m.proj_min);
  w.f64s(m.proj_max);
  const Ensemble& e = m.ensemble;
  w.i32(e.n_neurons);
  w.i32(e.dim);
  w.f64(e.lif.tau_rc);
  w.f64(e.lif.tau_ref);
  write_matrix(e.encoders, w);
  w.f64s(e.gains);
  w.f64s(e.biases);
  w.f64s(e.max_rates);
  w.f64s(e.intercepts);
  write_matrix(m.decoders, w);
}

NefClassifier load_nef(BinaryReader& r) {
  NefClassifier m;
  m.num_features = r.u64();
  m.projection = read_matrix(r);
  m.proj_min = r.f64s();
  m.proj_max = r.f64s();
  Ensemble& e = m.ensemble;
  const std::size_t at = r.offset();
  e.n_neurons = r.i32();
  e.dim = r.i32();
  e.lif.tau_rc = r.f64();
  e.lif.tau_ref = r.f64();
  e.encoders = read_matrix(r);
  e.gains = r.f64s();
  e.biases = r.f64s();
  e.max_rates = r.f64s();
  e.intercepts = r.f64s();
  m.decoders = read_matrix(r);
  const auto n = static_cast<std::size_t>(e.n_neurons);
  if (e.encoders.rows != e.n_neurons || e.encoders.cols != e.dim || e.gains.size() != n || e.biases.size() != n ||
      m.decoders.rows != e.n_neurons || m.projection.rows != e.dim ||
      static_cast<std::size_t>(m.projection.cols) != m.num_features)
    throw FormatError("inconsistent NEF model dimensions", at);
  return m;
}

}  // namespace faultlab
