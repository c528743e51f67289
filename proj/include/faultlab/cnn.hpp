#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faultlab/binary_io.hpp"
#include "faultlab/imaging.hpp"

namespace faultlab {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  int dim(std::size_t k) const { return shape[k]; }
  bool operator==(const Tensor&) const = default;
};

/// Valid cross-correlation, stride 1. input (C,H,W), weights (F,C,k,k) -> (F, H-k+1, W-k+1).
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias);

struct ConvGrads {
  Tensor input;  // empty when not requested
  Tensor weights;
  std::vector<double> bias;
};
ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream, bool need_input_grad);

Tensor relu(const Tensor& t);
/// Passes upstream where the forward input was > 0.
Tensor relu_backward(const Tensor& forward_input, const Tensor& upstream);

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index of each window's winner
};
/// Non-overlapping 2x2 windows; ties go to the first element in row-major order.
PoolResult maxpool2x2_forward(const Tensor& t);
Tensor maxpool2x2_backward(const std::vector<std::uint32_t>& argmax, const std::vector<int>& input_shape,
                           const Tensor& upstream);

/// y = W x + b with W shaped (out, in).
std::vector<double> fc_forward(std::span<const double> x, const Tensor& w, std::span<const double> b);
struct FcGrads {
  std::vector<double> input;
  Tensor weights;
  std::vector<double> bias;
};
FcGrads fc_backward(std::span<const double> x, const Tensor& w, std::span<const double> upstream);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};
/// Max-subtracted softmax cross-entropy; grad = p - onehot.
LossGrad softmax_xent(std::span<const double> logits, int label);

struct ConvBlockConfig {
  int filters = 8;
  int kernel = 3;
};

struct CnnConfig {
  int channels = 1;
  int height = 64;
  int width = 64;
  /// Edge-replicated border added to every input before the first conv.
  int input_pad = 1;
  std::vector<ConvBlockConfig> blocks{{8, 3}, {16, 3}};
  int num_classes = 8;
  int batch_size = 32;
  double learning_rate = 0.001;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Throws InputError unless every conv output has even spatial dims.
void validate(const CnnConfig& config);

struct CnnParams {
  std::vector<Tensor> conv_w;
  std::vector<std::vector<double>> conv_b;
  Tensor fc_w;
  std::vector<double> fc_b;

  /// Every trainable array in a fixed order.
  std::vector<std::span<double>> views();
  std::vector<std::span<const double>> views() const;
  std::size_t count() const;
};

struct CnnModel {
  CnnConfig config;
  CnnParams params;
  std::vector<double> loss_history;  // mean training loss per epoch
  /// Per-feature standardization fitted on the training set: (x - mean) * scale.
  /// Empty vectors mean identity.
  std::vector<double> input_mean;
  std::vector<double> input_scale;
};

/// Standard deviations below one gray level are raised to it.
inline constexpr double kMinInputStd = 1.0 / 255.0;

/// Applies the model's input standardization to a flattened sample.
std::vector<double> standardize(const CnnModel& model, std::span<const double> features);

inline constexpr double kOutputInitScale = 0.1;

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases; the output layer
/// limit is multiplied by kOutputInitScale.
CnnParams init_params(const CnnConfig& config, std::uint64_t seed);

/// Converts a flattened sample (gray: row-major; rgb: interleaved) into a
/// padded (C, H + 2p, W + 2p) tensor.
Tensor to_input(std::span<const double> features, const CnnConfig& config);

/// Test hooks for the verification harness.
struct CnnDebug {
  bool sabotage_relu_backward = false;
};

struct ForwardBackward {
  double loss = 0.0;
  CnnParams grads;
  std::vector<std::uint32_t> signature;  // ReLU masks and pool winners; identifies the linear region
};

std::vector<double> cnn_logits(const CnnParams& params, const CnnConfig& config, const Tensor& input);
ForwardBackward cnn_forward_backward(const CnnParams& params, const CnnConfig& config, const Tensor& input, int label,
                                     const CnnDebug& debug = {});

CnnModel cnn_train(std::span<const LabeledSample> train, const CnnConfig& config);
FaultLabel cnn_predict(const CnnModel& model, std::span<const double> features);

struct GradientCheckOptions {
  int min_parameters = 50;
  double step = 1e-4;
  bool zero_input = false;
  CnnDebug debug;
};

/// Max relative error between analytic and central-difference gradients over
/// every parameter at a seeded random input. Parameters whose +/- step crosses a
/// ReLU or pool boundary are skipped; at least min_parameters must remain.
double gradient_check(const CnnConfig& config, std::uint64_t seed, const GradientCheckOptions& options = {});

/// 1x8x8 input, one block of 2 filters.
CnnConfig gradient_check_config();

void save(const CnnModel& model, BinaryWriter& w);
CnnModel load_cnn(BinaryReader& r);

}  // namespace faultlab
