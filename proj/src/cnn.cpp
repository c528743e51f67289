#include "faultlab/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "faultlab/common.hpp"
#include "faultlab/naive_bayes.hpp"

namespace faultlab {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  data.assign(n, fill);
}

namespace {

std::size_t idx3(int a, int b, int c, int B, int C) {
  return (static_cast<std::size_t>(a) * B + b) * C + c;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias) {
  require(input.shape.size() == 3 && weights.shape.size() == 4, "conv2d: expected (C,H,W) input and (F,C,k,k) weights");
  const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int F = weights.dim(0), k = weights.dim(2);
  require(weights.dim(1) == C && weights.dim(3) == k, "conv2d: weight shape does not match input channels");
  require(H >= k && W >= k, "conv2d: input smaller than kernel");
  require(bias.size() == static_cast<std::size_t>(F), "conv2d: bias length must equal filter count");
  const int Ho = H - k + 1, Wo = W - k + 1;
  Tensor out({F, Ho, Wo});
  for (int f = 0; f < F; ++f) {
    double* o = &out.data[idx3(f, 0, 0, Ho, Wo)];
    std::fill(o, o + static_cast<std::ptrdiff_t>(Ho) * Wo, bias[static_cast<std::size_t>(f)]);
    for (int c = 0; c < C; ++c) {
      for (int ki = 0; ki < k; ++ki) {
        for (int kj = 0; kj < k; ++kj) {
          const double wv = weights.data[(idx3(f, c, ki, C, k)) * k + kj];
          for (int i = 0; i < Ho; ++i) {
            const double* in_row = &input.data[idx3(c, i + ki, kj, H, W)];
            double* out_row = o + static_cast<std::ptrdiff_t>(i) * Wo;
            for (int j = 0; j < Wo; ++j) out_row[j] += wv * in_row[j];
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream, bool need_input_grad) {
  const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int F = weights.dim(0), k = weights.dim(2);
  const int Ho = H - k + 1, Wo = W - k + 1;
  require(upstream.shape == std::vector<int>({F, Ho, Wo}), "conv2d_backward: upstream shape mismatch");
  ConvGrads g;
  g.weights = Tensor(weights.shape);
  g.bias.assign(static_cast<std::size_t>(F), 0.0);
  if (need_input_grad) g.input = Tensor(input.shape);
  for (int f = 0; f < F; ++f) {
    const double* u = &upstream.data[idx3(f, 0, 0, Ho, Wo)];
    double bsum = 0.0;
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(Ho) * Wo; ++q) bsum += u[q];
    g.bias[static_cast<std::size_t>(f)] = bsum;
    for (int c = 0; c < C; ++c) {
      for (int ki = 0; ki < k; ++ki) {
        for (int kj = 0; kj < k; ++kj) {
          const std::size_t widx = idx3(f, c, ki, C, k) * k + kj;
          const double wv = weights.data[widx];
          double acc = 0.0;
          for (int i = 0; i < Ho; ++i) {
            const double* in_row = &input.data[idx3(c, i + ki, kj, H, W)];
            const double* u_row = u + static_cast<std::ptrdiff_t>(i) * Wo;
            for (int j = 0; j < Wo; ++j) acc += u_row[j] * in_row[j];
            if (need_input_grad) {
              double* gi_row = &g.input.data[idx3(c, i + ki, kj, H, W)];
              for (int j = 0; j < Wo; ++j) gi_row[j] += wv * u_row[j];
            }
          }
          g.weights.data[widx] = acc;
        }
      }
    }
  }
  return g;
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data) v = std::max(0.0, v);
  return out;
}

Tensor relu_backward(const Tensor& forward_input, const Tensor& upstream) {
  require(forward_input.shape == upstream.shape, "relu_backward: shape mismatch");
  Tensor g(upstream.shape);
  for (std::size_t k = 0; k < g.size(); ++k) g.data[k] = forward_input.data[k] > 0.0 ? upstream.data[k] : 0.0;
  return g;
}

PoolResult maxpool2x2_forward(const Tensor& t) {
  require(t.shape.size() == 3, "maxpool2x2: expected (C,H,W)");
  const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
  require(H % 2 == 0 && W % 2 == 0, "maxpool2x2: spatial dims must be even, got " + std::to_string(H) + "x" +
                                        std::to_string(W));
  const int Ho = H / 2, Wo = W / 2;
  PoolResult r{Tensor({C, Ho, Wo}), std::vector<std::uint32_t>(static_cast<std::size_t>(C) * Ho * Wo)};
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < Ho; ++i) {
      for (int j = 0; j < Wo; ++j) {
        std::size_t best = idx3(c, 2 * i, 2 * j, H, W);
        for (std::size_t cand : {idx3(c, 2 * i, 2 * j + 1, H, W), idx3(c, 2 * i + 1, 2 * j, H, W),
                                 idx3(c, 2 * i + 1, 2 * j + 1, H, W)})
          if (t.data[cand] > t.data[best]) best = cand;
        const std::size_t o = idx3(c, i, j, Ho, Wo);
        r.output.data[o] = t.data[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool2x2_backward(const std::vector<std::uint32_t>& argmax, const std::vector<int>& input_shape,
                           const Tensor& upstream) {
  require(argmax.size() == upstream.size(), "maxpool2x2_backward: mask/upstream size mismatch");
  Tensor g(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) g.data[argmax[o]] += upstream.data[o];
  return g;
}

std::vector<double> fc_forward(std::span<const double> x, const Tensor& w, std::span<const double> b) {
  require(w.shape.size() == 2 && static_cast<std::size_t>(w.dim(1)) == x.size() &&
              static_cast<std::size_t>(w.dim(0)) == b.size(),
          "fc: shape mismatch");
  const std::size_t out = b.size(), in = x.size();
  std::vector<double> y(b.begin(), b.end());
  for (std::size_t r = 0; r < out; ++r) {
    const double* row = &w.data[r * in];
    double acc = 0.0;
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
  return y;
}

FcGrads fc_backward(std::span<const double> x, const Tensor& w, std::span<const double> upstream) {
  const std::size_t out = upstream.size(), in = x.size();
  require(w.shape.size() == 2 && static_cast<std::size_t>(w.dim(0)) == out && static_cast<std::size_t>(w.dim(1)) == in,
          "fc_backward: shape mismatch");
  FcGrads g{std::vector<double>(in, 0.0), Tensor(w.shape), std::vector<double>(upstream.begin(), upstream.end())};
  for (std::size_t r = 0; r < out; ++r) {
    const double u = upstream[r];
    const double* row = &w.data[r * in];
    double* grow = &g.weights.data[r * in];
    for (std::size_t c = 0; c < in; ++c) {
      grow[c] = u * x[c];
      g.input[c] += u * row[c];
    }
  }
  return g;
}

LossGrad softmax_xent(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw InputError("softmax_xent: label out of range: " + std::to_string(label));
  const double m = *std::max_element(logits.begin(), logits.end());
  LossGrad r;
  r.grad.resize(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    r.grad[k] = std::exp(logits[k] - m);
    z += r.grad[k];
  }
  for (double& p : r.grad) p /= z;
  r.loss = std::log(z) - (logits[static_cast<std::size_t>(label)] - m);
  r.grad[static_cast<std::size_t>(label)] -= 1.0;
  return r;
}

namespace {

struct Geometry {
  std::vector<int> in_h, in_w;  // spatial size entering each block
  int fc_in = 0;
};

Geometry geometry(const CnnConfig& c) {
  require(c.channels == 1 || c.channels == 3, "cnn: channels must be 1 or 3");
  require(c.num_classes == kNumClasses, "cnn: output classes must be 8");
  require(c.input_pad >= 0, "cnn: input_pad must be >= 0");
  require(!c.blocks.empty(), "cnn: at least one conv block is required");
  require(c.batch_size >= 1 && c.max_epochs >= 0 && c.learning_rate > 0.0, "cnn: bad training hyperparameters");
  Geometry g;
  int h = c.height + 2 * c.input_pad, w = c.width + 2 * c.input_pad;
  int ch = c.channels;
  for (std::size_t b = 0; b < c.blocks.size(); ++b) {
    const auto& blk = c.blocks[b];
    require(blk.filters >= 1 && blk.kernel >= 1, "cnn: bad conv block");
    g.in_h.push_back(h);
    g.in_w.push_back(w);
    h = h - blk.kernel + 1;
    w = w - blk.kernel + 1;
    require(h >= 2 && w >= 2 && h % 2 == 0 && w % 2 == 0,
            "cnn: conv output of block " + std::to_string(b) + " is " + std::to_string(h) + "x" + std::to_string(w) +
                ", must be even for 2x2 pooling");
    h /= 2;
    w /= 2;
    ch = blk.filters;
  }
  g.fc_in = ch * h * w;
  return g;
}

}  // namespace

void validate(const CnnConfig& config) { (void)geometry(config); }

std::vector<std::span<double>> CnnParams::views() {
  std::vector<std::span<double>> v;
  for (std::size_t b = 0; b < conv_w.size(); ++b) {
    v.emplace_back(conv_w[b].data);
    v.emplace_back(conv_b[b]);
  }
  v.emplace_back(fc_w.data);
  v.emplace_back(fc_b);
  return v;
}

std::vector<std::span<const double>> CnnParams::views() const {
  std::vector<std::span<const double>> v;
  for (std::size_t b = 0; b < conv_w.size(); ++b) {
    v.emplace_back(conv_w[b].data);
    v.emplace_back(conv_b[b]);
  }
  v.emplace_back(fc_w.data);
  v.emplace_back(fc_b);
  return v;
}

std::size_t CnnParams::count() const {
  std::size_t n = 0;
  for (auto s : views()) n += s.size();
  return n;
}

CnnParams init_params(const CnnConfig& config, std::uint64_t seed) {
  const Geometry g = geometry(config);
  Rng rng(derive_seed(seed, stream::kCnnInit));
  CnnParams p;
  int ch = config.channels;
  for (const auto& blk : config.blocks) {
    Tensor w({blk.filters, ch, blk.kernel, blk.kernel});
    const double limit = std::sqrt(6.0 / (ch * blk.kernel * blk.kernel));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    p.conv_w.push_back(std::move(w));
    p.conv_b.emplace_back(static_cast<std::size_t>(blk.filters), 0.0);
    ch = blk.filters;
  }
  p.fc_w = Tensor({config.num_classes, g.fc_in});
  // Output layer scaled down so initial predictions start near uniform.
  const double limit = kOutputInitScale * std::sqrt(6.0 / g.fc_in);
  for (double& v : p.fc_w.data) v = rng.uniform(-limit, limit);
  p.fc_b.assign(static_cast<std::size_t>(config.num_classes), 0.0);
  return p;
}

Tensor to_input(std::span<const double> features, const CnnConfig& c) {
  const int C = c.channels, H = c.height, W = c.width, p = c.input_pad;
  require(features.size() == static_cast<std::size_t>(C) * H * W,
          "cnn: sample has " + std::to_string(features.size()) + " features, config expects " +
              std::to_string(C * H * W));
  const int Hp = H + 2 * p, Wp = W + 2 * p;
  Tensor t({C, Hp, Wp});
  for (int ch = 0; ch < C; ++ch)
    for (int i = 0; i < Hp; ++i)
      for (int j = 0; j < Wp; ++j) {
        const int si = std::clamp(i - p, 0, H - 1), sj = std::clamp(j - p, 0, W - 1);
        t.data[idx3(ch, i, j, Hp, Wp)] = features[(static_cast<std::size_t>(si) * W + sj) * C + ch];
      }
  return t;
}

namespace {

struct BlockCache {
  Tensor input;
  Tensor pre;  // conv output before ReLU
  PoolResult pool;
};

std::vector<double> forward(const CnnParams& p, const Tensor& input, std::vector<BlockCache>* caches) {
  Tensor x = input;
  for (std::size_t b = 0; b < p.conv_w.size(); ++b) {
    Tensor pre = conv2d_forward(x, p.conv_w[b], p.conv_b[b]);
    PoolResult pool = maxpool2x2_forward(relu(pre));
    Tensor next = pool.output;
    if (caches) caches->push_back({std::move(x), std::move(pre), std::move(pool)});
    x = std::move(next);
  }
  return fc_forward(x.data, p.fc_w, p.fc_b);
}

}  // namespace

std::vector<double> cnn_logits(const CnnParams& params, const CnnConfig& config, const Tensor& input) {
  (void)geometry(config);
  return forward(params, input, nullptr);
}

ForwardBackward cnn_forward_backward(const CnnParams& p, const CnnConfig& config, const Tensor& input, int label,
                                     const CnnDebug& debug) {
  (void)config;
  std::vector<BlockCache> caches;
  const std::vector<double> logits = forward(p, input, &caches);
  const LossGrad lg = softmax_xent(logits, label);

  ForwardBackward r;
  r.loss = lg.loss;
  const Tensor& last = caches.back().pool.output;
  FcGrads fg = fc_backward(last.data, p.fc_w, lg.grad);
  r.grads.fc_w = std::move(fg.weights);
  r.grads.fc_b = std::move(fg.bias);
  r.grads.conv_w.resize(p.conv_w.size());
  r.grads.conv_b.resize(p.conv_b.size());

  Tensor upstream(last.shape);
  upstream.data = std::move(fg.input);
  for (std::size_t b = caches.size(); b-- > 0;) {
    const BlockCache& cache = caches[b];
    const Tensor g_relu = maxpool2x2_backward(cache.pool.argmax, cache.pre.shape, upstream);
    const Tensor g_pre = debug.sabotage_relu_backward ? g_relu : relu_backward(cache.pre, g_relu);
    ConvGrads cg = conv2d_backward(cache.input, p.conv_w[b], g_pre, b > 0);
    r.grads.conv_w[b] = std::move(cg.weights);
    r.grads.conv_b[b] = std::move(cg.bias);
    upstream = std::move(cg.input);
  }

  for (const auto& cache : caches) {
    std::uint32_t word = 0;
    int bit = 0;
    for (double v : cache.pre.data) {
      if (v > 0.0) word |= 1u << bit;
      if (++bit == 32) {
        r.signature.push_back(word);
        word = 0;
        bit = 0;
      }
    }
    r.signature.push_back(word);
    r.signature.insert(r.signature.end(), cache.pool.argmax.begin(), cache.pool.argmax.end());
  }
  return r;
}

CnnModel cnn_train(std::span<const LabeledSample> train, const CnnConfig& config) {
  (void)geometry(config);
  if (train.empty()) throw InputError("cnn_train: empty training set");
  for (const auto& s : train) (void)to_input(s.features, config);

  CnnModel m;
  m.config = config;
  const std::size_t f = train.front().features.size();
  m.input_mean.assign(f, 0.0);
  m.input_scale.assign(f, 0.0);
  for (const auto& s : train)
    for (std::size_t q = 0; q < f; ++q) m.input_mean[q] += s.features[q];
  for (double& v : m.input_mean) v /= static_cast<double>(train.size());
  for (const auto& s : train)
    for (std::size_t q = 0; q < f; ++q) {
      const double d = s.features[q] - m.input_mean[q];
      m.input_scale[q] += d * d;
    }
  for (double& v : m.input_scale) v = 1.0 / std::max(std::sqrt(v / static_cast<double>(train.size())), kMinInputStd);
  std::vector<Tensor> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) inputs.push_back(to_input(standardize(m, s.features), config));

  m.params = init_params(config, config.seed);
  const std::size_t n = train.size();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<ForwardBackward> results(bs);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng shuffle(derive_seed(config.seed, stream::kCnnShuffle, static_cast<std::uint64_t>(epoch)));
    for (std::size_t k = n - 1; k > 0; --k) std::swap(order[k], order[shuffle.index(k + 1)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      parallel_for(count, config.threads, [&](std::size_t e) {
        const std::size_t s = order[start + e];
        results[e] = cnn_forward_backward(m.params, config, inputs[s], code(train[s].label));
      });
      // Fixed-order reduction keeps the update independent of the schedule.
      auto params = m.params.views();
      const double scale = config.learning_rate / static_cast<double>(count);
      std::vector<std::vector<double>> sums;
      for (auto v : params) sums.emplace_back(v.size(), 0.0);
      for (std::size_t e = 0; e < count; ++e) {
        epoch_loss += results[e].loss;
        const auto g = std::as_const(results[e].grads).views();
        for (std::size_t a = 0; a < sums.size(); ++a)
          for (std::size_t q = 0; q < sums[a].size(); ++q) sums[a][q] += g[a][q];
      }
      for (std::size_t a = 0; a < params.size(); ++a)
        for (std::size_t q = 0; q < params[a].size(); ++q) params[a][q] -= scale * sums[a][q];
    }
    m.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  return m;
}

std::vector<double> standardize(const CnnModel& model, std::span<const double> features) {
  std::vector<double> x(features.begin(), features.end());
  if (model.input_mean.empty()) return x;
  if (x.size() != model.input_mean.size())
    throw InputError("cnn: sample has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(model.input_mean.size()));
  for (std::size_t q = 0; q < x.size(); ++q) x[q] = (x[q] - model.input_mean[q]) * model.input_scale[q];
  return x;
}

FaultLabel cnn_predict(const CnnModel& model, std::span<const double> features) {
  const auto logits = cnn_logits(model.params, model.config, to_input(standardize(model, features), model.config));
  return label_from_code(argmax_lowest(logits));
}

CnnConfig gradient_check_config() {
  CnnConfig c;
  c.channels = 1;
  c.height = 8;
  c.width = 8;
  c.input_pad = 1;
  c.blocks = {{2, 3}};
  return c;
}

double gradient_check(const CnnConfig& config, std::uint64_t seed, const GradientCheckOptions& opt) {
  (void)geometry(config);
  Rng rng(derive_seed(seed, stream::kGradcheck));
  CnnParams params = init_params(config, seed);
  // Random biases so the check also covers bias gradients away from zero.
  if (!opt.zero_input) {
    for (auto& b : params.conv_b)
      for (double& v : b) v = rng.uniform(-0.1, 0.1);
    for (double& v : params.fc_b) v = rng.uniform(-0.1, 0.1);
  }
  std::vector<double> features(static_cast<std::size_t>(config.channels) * config.height * config.width, 0.0);
  if (!opt.zero_input)
    for (double& v : features) v = rng.uniform();
  const Tensor input = to_input(features, config);
  const int label = static_cast<int>(rng.index(static_cast<std::uint64_t>(config.num_classes)));

  const ForwardBackward base = cnn_forward_backward(params, config, input, label, opt.debug);
  const auto grads = std::as_const(base.grads).views();
  auto views = params.views();
  std::vector<std::pair<std::size_t, std::size_t>> flat;  // (array, offset)
  for (std::size_t a = 0; a < views.size(); ++a)
    for (std::size_t q = 0; q < views[a].size(); ++q) flat.emplace_back(a, q);

  double worst = 0.0;
  int checked = 0;
  for (const auto& [a, q] : flat) {
    double& w = views[a][q];
    const double saved = w;
    w = saved + opt.step;
    const ForwardBackward plus = cnn_forward_backward(params, config, input, label);
    w = saved - opt.step;
    const ForwardBackward minus = cnn_forward_backward(params, config, input, label);
    w = saved;
    if (plus.signature != base.signature || minus.signature != base.signature) continue;
    const double numeric = (plus.loss - minus.loss) / (2.0 * opt.step);
    const double analytic = grads[a][q];
    const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, rel);
    ++checked;
  }
  if (checked < opt.min_parameters) throw InputError("gradient_check: too few differentiable parameters");
  return worst;
}

void save(const CnnModel& m, BinaryWriter& w) {
  const CnnConfig& c = m.config;
  w.i32(c.channels);
  w.i32(c.height);
  w.i32(c.width);
  w.i32(c.input_pad);
  w.u32(static_cast<std::uint32_t>(c.blocks.size()));
  for (const auto& b : c.blocks) {
    w.i32(b.filters);
    w.i32(b.kernel);
  }
  w.i32(c.num_classes);
  w.i32(c.batch_size);
  w.f64(c.learning_rate);
  w.i32(c.max_epochs);
  w.u64(c.seed);
  for (auto v : m.params.views()) w.f64s(std::vector<double>(v.begin(), v.end()));
  w.f64s(m.loss_history);
  w.f64s(m.input_mean);
  w.f64s(m.input_scale);
}

CnnModel load_cnn(BinaryReader& r) {
  CnnModel m;
  CnnConfig& c = m.config;
  c.channels = r.i32();
  c.height = r.i32();
  c.width = r.i32();
  c.input_pad = r.i32();
  const std::uint32_t nb = r.u32();
  if (nb > 64) throw FormatError("too many conv blocks", r.offset());
  c.blocks.resize(nb);
  for (auto& b : c.blocks) {
    b.filters = r.i32();
    b.kernel = r.i32();
  }
  c.num_classes = r.i32();
  c.batch_size = r.i32();
  c.learning_rate = r.f64();
  c.max_epochs = r.i32();
  c.seed = r.u64();
  const std::size_t at = r.offset();
  try {
    m.params = init_params(c, 0);
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid CNN geometry: ") + e.what(), at);
  }
  for (auto v : m.params.views()) {
    const std::size_t vat = r.offset();
    const auto data = r.f64s();
    if (data.size() != v.size()) throw FormatError("CNN parameter block has wrong size", vat);
    std::copy(data.begin(), data.end(), v.begin());
  }
  m.loss_history = r.f64s();
  const std::size_t sat = r.offset();
  m.input_mean = r.f64s();
  m.input_scale = r.f64s();
  const auto features = static_cast<std::size_t>(c.channels) * c.height * c.width;
  if (m.input_mean.size() != m.input_scale.size() || (!m.input_mean.empty() && m.input_mean.size() != features))
    throw FormatError("CNN standardization block has wrong size", sat);
  return m;
}

}  // namespace faultlab
