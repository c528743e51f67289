#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "faultlab/common.hpp"
#include "faultlab/nef.hpp"
#include "faultlab/pipeline.hpp"

using namespace faultlab;

namespace {

Matrix line_points(int n) {
  Matrix x(n, 1);
  for (int k = 0; k < n; ++k) x(k, 0) = -1.0 + 2.0 * k / (n - 1);
  return x;
}

Ensemble identity_ensemble(std::uint64_t seed) {
  EnsembleParams p;
  p.n_neurons = 100;
  p.dim = 1;
  p.seed = seed;
  return make_ensemble(p);
}

// One ensemble driven by a constant node and decoded into an output node.
Network identity_network(const Ensemble& e, const Matrix& decoders, double x) {
  Network net;
  net.nodes.push_back({{x}});
  net.nodes.push_back({std::vector<double>(static_cast<std::size_t>(decoders.cols), 0.0)});
  net.ensembles.push_back(e);
  net.connections.push_back({{ObjectKind::Node, 0}, {ObjectKind::Ensemble, 0}, Matrix(1, 1, 1.0), 0.005});
  net.connections.push_back({{ObjectKind::Ensemble, 0}, {ObjectKind::Node, 1}, decoders, 0.005});
  net.probes.push_back({1, 0.001, {}, {}});
  return net;
}

Ensemble single_neuron(double current) {
  Ensemble e;
  e.n_neurons = 1;
  e.dim = 1;
  e.encoders = Matrix(1, 1, 1.0);
  e.gains = {1.0};
  e.biases = {current};
  e.max_rates = {300.0};
  e.intercepts = {0.0};
  return e;
}

std::vector<LabeledSample> toy_train() {
  std::vector<LabeledSample> out;
  Rng rng(5);
  for (int k = 0; k < 40; ++k) {
    const auto l = static_cast<FaultLabel>(k % 4);
    std::vector<double> f(12);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.0, 0.3) + (i % 4 == static_cast<std::size_t>(k % 4) ? 0.7 : 0.0);
    out.push_back({f, l, {}});
  }
  return out;
}

NefConfig toy_config() {
  NefConfig c;
  c.dim = 6;
  c.n_neurons = 120;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("lif_rate closed form") {
  CHECK(lif_rate(1.0) == 0.0);
  CHECK(lif_rate(0.5) == 0.0);
  CHECK(lif_rate(-3.0) == 0.0);
  CHECK(lif_rate(2.0) == doctest::Approx(63.0396).epsilon(1e-5));
  CHECK(lif_rate(1.0 + 1e-15) < lif_rate(1.0 + 1e-9));
  CHECK(lif_rate(1.0 + 1e-9) < lif_rate(1.0 + 1e-3));
  CHECK(lif_rate(1.0 + 1e-15) < 1.5);
  CHECK(lif_rate(1e9) < 500.0);
  CHECK(lif_rate(1e9) > 499.0);
  double prev = 0.0;
  for (double j = 1.01; j < 50.0; j += 0.37) {
    const double r = lif_rate(j);
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("gain and bias solve") {
  Ensemble e;
  e.n_neurons = 2;
  e.dim = 1;
  e.max_rates = {250.0, 499.9};
  e.intercepts = {0.0, -0.5};
  const auto [gains, biases] = solve_gain_bias(e);
  const double j_max = current_for_rate(250.0);
  CHECK(gains[0] == doctest::Approx(j_max - 1.0).epsilon(1e-14));
  CHECK(biases[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lif_rate(j_max) == doctest::Approx(250.0).epsilon(1e-12));
  CHECK(gains[1] > 0.0);

  e.max_rates[1] = 500.0;
  CHECK_THROWS_AS(solve_gain_bias(e), InputError);
  e.max_rates[1] = 600.0;
  CHECK_THROWS_AS(solve_gain_bias(e), InputError);
}

TEST_CASE("fitted neurons hit threshold at the intercept and max rate at e.x = 1") {
  EnsembleParams p;
  p.n_neurons = 50;
  p.dim = 1;
  p.seed = 9;
  const Ensemble e = make_ensemble(p);
  for (int i = 0; i < e.n_neurons; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    CHECK(e.max_rates[idx] >= 200.0);
    CHECK(e.max_rates[idx] <= 400.0);
    CHECK(std::abs(e.intercepts[idx]) < 0.95);
    CHECK(e.gains[idx] > 0.0);
    double norm = 0.0;
    for (int d = 0; d < e.dim; ++d) norm += e.encoders(i, d) * e.encoders(i, d);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> at_one(1), at_intercept(1);
    for (int d = 0; d < e.dim; ++d) {
      at_one[static_cast<std::size_t>(d)] = e.encoders(i, d);
      at_intercept[static_cast<std::size_t>(d)] = e.encoders(i, d) * e.intercepts[idx];
    }
    CHECK(std::abs(rates(e, at_one)[idx] - e.max_rates[idx]) <= 1e-6);
    const double thr = rates(e, at_intercept)[idx];
    CHECK(thr <= 1e-9);
    CHECK(thr >= 0.0);
  }
}

TEST_CASE("rates compose lif_rate over currents") {
  EnsembleParams p;
  p.n_neurons = 30;
  p.dim = 2;
  p.seed = 4;
  const Ensemble e = make_ensemble(p);
  const std::vector<double> zero{0.0, 0.0};
  const auto r0 = rates(e, zero);
  for (int i = 0; i < e.n_neurons; ++i) CHECK(r0[static_cast<std::size_t>(i)] == lif_rate(e.biases[static_cast<std::size_t>(i)]));

  const std::vector<double> x{0.3, -0.6};
  const auto r = rates(e, x);
  for (int i = 0; i < e.n_neurons; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double j = e.gains[idx] * (e.encoders(i, 0) * x[0] + e.encoders(i, 1) * x[1]) + e.biases[idx];
    CHECK(r[idx] == doctest::Approx(lif_rate(j)).epsilon(1e-14));
  }

  Ensemble flipped = e;
  for (double& v : flipped.encoders.data) v = -v;
  const std::vector<double> neg{-0.3, 0.6};
  CHECK(rates(flipped, neg) == r);
  CHECK_THROWS_AS(rates(e, std::vector<double>{1.0}), InputError);
}

TEST_CASE("identity decode over [-1, 1]") {
  CHECK(nef_identity_rmse(1) <= 0.05);
  CHECK(nef_identity_rmse(2) <= 0.05);
  CHECK(nef_identity_rmse(3) <= 0.05);
}

TEST_CASE("decoders exact when targets lie in the row space with reg 0") {
  Ensemble e;
  e.n_neurons = 3;
  e.dim = 1;
  e.encoders = Matrix(3, 1);
  e.encoders(0, 0) = 1.0;
  e.encoders(1, 0) = -1.0;
  e.encoders(2, 0) = 1.0;
  e.gains = {2.0, 1.5, 4.0};
  e.biases = {2.5, 2.0, 1.5};
  const Matrix x = line_points(7);
  const Matrix a = activities(e, x);
  const std::vector<double> w{0.02, -0.01, 0.005};
  Matrix t(x.rows, 1);
  for (int k = 0; k < x.rows; ++k)
    for (int i = 0; i < 3; ++i) t(k, 0) += a(k, i) * w[static_cast<std::size_t>(i)];
  const Matrix d = solve_decoders(e, x, t, 0.0);
  for (int i = 0; i < 3; ++i) CHECK(d(i, 0) == doctest::Approx(w[static_cast<std::size_t>(i)]).epsilon(1e-8));
}

TEST_CASE("decoders match a dense least-squares oracle") {
  for (int trial = 0; trial < 10; ++trial) {
    EnsembleParams p;
    p.n_neurons = 5 + 5 * trial;
    p.dim = 1 + trial % 3;
    p.seed = 100 + static_cast<std::uint64_t>(trial);
    const Ensemble e = make_ensemble(p);
    Rng rng(static_cast<std::uint64_t>(trial));
    Matrix x(60, p.dim), t(60, 2);
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < x.rows; ++k) {
      t(k, 0) = x(k, 0);
      t(k, 1) = x(k, 0) * x(k, p.dim - 1);
    }
    const double reg = trial % 2 ? 0.1 : 0.01;
    const Matrix d = solve_decoders(e, x, t, reg);

    // Augmented system [A; sqrt(lambda) I] D = [T; 0], solved by QR.
    const Matrix a = activities(e, x);
    const double a_max = *std::max_element(a.data.begin(), a.data.end());
    const double lambda = (reg * a_max) * (reg * a_max) * x.rows;
    const int n = p.n_neurons;
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(x.rows + n, n);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(x.rows + n, 2);
    for (int k = 0; k < x.rows; ++k) {
      for (int i = 0; i < n; ++i) big(k, i) = a(k, i);
      rhs(k, 0) = t(k, 0);
      rhs(k, 1) = t(k, 1);
    }
    for (int i = 0; i < n; ++i) big(x.rows + i, i) = std::sqrt(lambda);
    const Eigen::MatrixXd ref = big.colPivHouseholderQr().solve(rhs);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) CHECK(std::abs(d(i, c) - ref(i, c)) <= 1e-6);
  }
}

TEST_CASE("ridge penalty shrinks decoders toward zero") {
  const Ensemble e = identity_ensemble(1);
  const Matrix x = line_points(200);
  const Matrix d = solve_decoders(e, x, x, 1e4);
  for (double v : d.data) CHECK(std::abs(v) < 1e-6);
  CHECK_THROWS_AS(solve_decoders(e, x, x, -0.1), InputError);
  CHECK_THROWS_AS(solve_decoders(e, line_points(1), line_points(1), 0.1), InputError);
}

TEST_CASE("subthreshold currents never spike") {
  Network net;
  net.nodes.push_back({{0.0}});
  net.nodes.push_back({{0.0}});
  Ensemble e = single_neuron(1.0);
  e.n_neurons = 3;
  e.encoders = Matrix(3, 1, 1.0);
  e.gains = {1.0, 1.0, 1.0};
  e.biases = {1.0, 0.5, -2.0};
  net.ensembles.push_back(e);
  net.connections.push_back({{ObjectKind::Node, 0}, {ObjectKind::Ensemble, 0}, Matrix(1, 1, 1.0), 0.005});
  net.connections.push_back({{ObjectKind::Ensemble, 0}, {ObjectKind::Node, 1}, Matrix(3, 1, 1.0), 0.005});
  const auto r = simulate_spiking(net, 0.001, 1.0);
  for (int c : r.spike_counts[0]) CHECK(c == 0);
  for (const auto& y : r.decoded) CHECK(y[0] == 0.0);
  CHECK(r.mean_last_half[0] == 0.0);
}

TEST_CASE("single neuron at J = 2 fires near the closed-form rate") {
  Network net;
  net.nodes.push_back({{0.0}});
  net.nodes.push_back({{0.0}});
  net.ensembles.push_back(single_neuron(2.0));
  net.connections.push_back({{ObjectKind::Node, 0}, {ObjectKind::Ensemble, 0}, Matrix(1, 1, 1.0), 0.005});
  net.connections.push_back({{ObjectKind::Ensemble, 0}, {ObjectKind::Node, 1}, Matrix(1, 1, 1.0), 0.005});
  const double duration = 2.0;
  const auto r = simulate_spiking(net, 0.001, duration);
  const double empirical = r.spike_counts[0][0] / duration;
  CHECK(std::abs(empirical - lif_rate(2.0)) <= 0.1 * lif_rate(2.0));
  CHECK(r.times.size() == 2000);
  // A decoder weight of 1 makes the filtered output the firing rate in Hz.
  CHECK(r.mean_last_half[0] == doctest::Approx(empirical).epsilon(0.1));
}

TEST_CASE("spiking decode tracks the rate decode") {
  const Ensemble e = identity_ensemble(1);
  const Matrix x = line_points(500);
  const Matrix d = solve_decoders(e, x, x, 0.1);
  double sq = 0.0;
  int n = 0;
  for (int k = 0; k <= 20; ++k) {
    const double v = -1.0 + 0.1 * k;
    Network net = identity_network(e, d, v);
    const double rate = rate_output(net, 1)[0];
    const auto r = simulate_spiking(net, 0.001, 2.0);
    sq += (r.mean_last_half[0] - rate) * (r.mean_last_half[0] - rate);
    ++n;
    CHECK(net.probes[0].samples.size() == 2000);
  }
  const double rmse = std::sqrt(sq / n);
  MESSAGE("spiking vs rate rmse " << rmse);
  CHECK(rmse <= 0.15);
}

TEST_CASE("spiking simulation argument and topology errors") {
  const Ensemble e = identity_ensemble(2);
  const Matrix d(100, 1, 0.0);
  Network net = identity_network(e, d, 0.0);
  CHECK_THROWS_AS(simulate_spiking(net, 0.0, 1.0), InputError);
  CHECK_THROWS_AS(simulate_spiking(net, 0.001, 0.01), InputError);
  CHECK_NOTHROW(simulate_spiking(net, 0.001, 0.05));

  Network bad_period = identity_network(e, d, 0.0);
  bad_period.probes[0].sample_period = 0.0015;
  CHECK_THROWS_AS(simulate_spiking(bad_period, 0.001, 0.1), InputError);
  bad_period.probes[0].sample_period = 0.002;
  CHECK_NOTHROW(simulate_spiking(bad_period, 0.001, 0.1));
  CHECK(bad_period.probes[0].times.size() == 50);

  Network bad_probe = identity_network(e, d, 0.0);
  bad_probe.probes[0].connection = 0;
  CHECK_THROWS_AS(simulate_spiking(bad_probe, 0.001, 0.1), InputError);

  Network bad_shape = identity_network(e, d, 0.0);
  bad_shape.connections[1].weights = Matrix(99, 1);
  CHECK_THROWS_AS(simulate_spiking(bad_shape, 0.001, 0.1), InputError);
  CHECK_THROWS_AS(rate_output(bad_shape, 1), InputError);

  Network ens_to_ens = identity_network(e, d, 0.0);
  ens_to_ens.connections.push_back({{ObjectKind::Ensemble, 0}, {ObjectKind::Ensemble, 0}, Matrix(1, 1), 0.005});
  CHECK_THROWS_AS(simulate_spiking(ens_to_ens, 0.001, 0.1), InputError);

  Network loop = identity_network(e, d, 0.0);
  loop.connections.push_back({{ObjectKind::Node, 1}, {ObjectKind::Ensemble, 0}, Matrix(1, 1), 0.005});
  CHECK_THROWS_AS(simulate_spiking(loop, 0.001, 0.1), InputError);

  Network out_of_range = identity_network(e, d, 0.0);
  out_of_range.connections[0].source.index = 5;
  CHECK_THROWS_AS(rate_output(out_of_range, 1), InputError);
}

TEST_CASE("classifier rate scores") {
  const auto train = toy_train();
  const NefClassifier m = nef_fit_classifier(train, toy_config());
  CHECK(m.projection.rows == 6);
  CHECK(m.projection.cols == 12);
  for (double v : m.projection.data) CHECK(std::abs(std::abs(v) - 1.0 / std::sqrt(12.0)) < 1e-15);
  CHECK(m.decoders.rows == 120);
  CHECK(m.decoders.cols == 8);

  int correct = 0;
  for (const auto& s : train) {
    const auto scores = nef_scores(m, s.features);
    double sum = 0.0;
    for (double v : scores) sum += v;
    CHECK(std::abs(sum - 1.0) <= 0.3);
    const auto z = m.encode_input(s.features);
    for (double v : z) {
      CHECK(v >= -1.0 - 1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
    if (nef_predict_rate(m, s.features) == s.label) ++correct;
  }
  CHECK(correct >= 36);
  CHECK_THROWS_AS(nef_scores(m, std::vector<double>(11, 0.0)), InputError);

  NefConfig too_wide = toy_config();
  too_wide.dim = 13;
  CHECK_THROWS_AS(nef_fit_classifier(train, too_wide), InputError);
}

TEST_CASE("identical inputs with different labels average their targets") {
  auto train = toy_train();
  auto twin = train[0];
  twin.label = FaultLabel::AntennaUptilt;
  train.push_back(twin);
  NefConfig c = toy_config();
  c.reg = 1e-6;
  const NefClassifier m = nef_fit_classifier(train, c);
  const auto scores = nef_scores(m, train[0].features);
  CHECK(std::abs(scores[static_cast<std::size_t>(code(train[0].label))] - 0.5) < 0.1);
  CHECK(std::abs(scores[static_cast<std::size_t>(code(FaultLabel::AntennaUptilt))] - 0.5) < 0.1);
  CHECK(scores[static_cast<std::size_t>(code(train[0].label))] ==
        doctest::Approx(scores[static_cast<std::size_t>(code(FaultLabel::AntennaUptilt))]).epsilon(1e-6));
}

TEST_CASE("classifier determinism, threads and decoder scaling") {
  const auto train = toy_train();
  const NefClassifier a = nef_fit_classifier(train, toy_config());
  const NefClassifier b = nef_fit_classifier(train, toy_config());
  NefConfig threaded = toy_config();
  threaded.threads = 3;
  const NefClassifier c = nef_fit_classifier(train, threaded);
  CHECK(a.decoders == b.decoders);
  CHECK(a.decoders == c.decoders);
  CHECK(a.ensemble.gains == c.ensemble.gains);

  NefClassifier scaled = a;
  for (double& v : scaled.decoders.data) v *= 3.5;
  for (const auto& s : train) CHECK(nef_predict_rate(a, s.features) == nef_predict_rate(scaled, s.features));
}

TEST_CASE("spiking prediction agrees with rate prediction") {
  const auto train = toy_train();
  const NefClassifier m = nef_fit_classifier(train, toy_config());
  int agree = 0;
  for (const auto& s : train) {
    const auto sp = nef_predict_spiking(m, s.features, 0.001, 0.2);
    if (sp.label == nef_predict_rate(m, s.features)) ++agree;
    CHECK(sp.probe.samples.size() == 200);
    CHECK(sp.probe.samples.front().size() == 8);
  }
  CHECK(agree >= 36);
}

TEST_CASE("classifier save and load") {
  const auto train = toy_train();
  const NefClassifier m = nef_fit_classifier(train, toy_config());
  BinaryWriter w;
  save(m, w);
  BinaryReader r(w.bytes());
  const NefClassifier back = load_nef(r);
  CHECK(back.decoders == m.decoders);
  CHECK(back.projection == m.projection);
  for (const auto& s : train) CHECK(nef_scores(back, s.features) == nef_scores(m, s.features));

  const std::string bytes = w.bytes();
  BinaryReader cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_nef(cut), FormatError);
}
