#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "reid/losses.hpp"
#include "reid/matrix.hpp"

namespace reid {

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Per-feature batch normalisation with learned scale/shift.
struct BatchNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNorm identity(std::size_t features);

  friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

enum class BnMode { train, eval };

// Train mode normalises with the batch mean and biased variance, then moves
// the running statistics by `momentum` towards the batch mean and unbiased
// variance. Eval mode normalises with the running statistics. Train mode
// requires at least two rows.
Matrix bnneck_forward(const Matrix& x, BatchNorm& bn, BnMode mode);

// Dense layers with ReLU between them (none after the last, which produces
// the embedding), an optional BNNeck, and a bias-free classifier.
struct ToyNet {
  std::vector<DenseLayer> layers;
  std::optional<BatchNorm> bnneck;
  Matrix classifier;  // classes x embedding

  std::size_t input_dim() const { return layers.front().weight.cols; }
  std::size_t embedding_dim() const { return layers.back().weight.rows; }
  std::size_t classes() const { return classifier.rows; }

  // Throws ValidationError if layer shapes do not chain or a value is not finite.
  void validate() const;

  friend bool operator==(const ToyNet&, const ToyNet&) = default;
};

struct ToyNetShape {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // widths of the hidden layers
  std::size_t embedding_dim = 0;
  std::size_t classes = 0;
  bool bnneck = true;
};

// He-normal dense weights, zero biases, N(0, 1/embedding) classifier.
ToyNet make_toy_net(const ToyNetShape& shape, std::uint64_t seed);

// Trainable parameter blocks in a fixed order: for each layer weight then
// bias, then BNNeck gamma and beta, then the classifier.
std::vector<std::span<double>> trainable_parameters(ToyNet& net);
std::vector<std::span<const double>> trainable_parameters(const ToyNet& net);

// A zero-valued net with the same shape, used to hold gradients.
ToyNet zeros_like(const ToyNet& net);

struct NetLoss {
  CombinedLoss loss;
  ToyNet grads;  // same shape as the net; running statistics are unused
};

// Full forward/backward pass in train mode. The triplet term sees the
// embedding before the BNNeck, the classifier sees it after. Running BN
// statistics are left untouched, so this is a pure function of the net.
NetLoss net_loss_and_gradients(const ToyNet& net, const Matrix& inputs,
                               std::span<const int> labels, const LossConfig& cfg);

// Eval-mode embedding before the BNNeck (the triplet-loss feature).
Matrix backbone_features(const ToyNet& net, const Matrix& inputs);

// Retrieval embedding: forward pass in eval mode, taken after the BNNeck.
Matrix embed(const ToyNet& net, const Matrix& inputs);

// Logits in eval mode.
Matrix predict_logits(const ToyNet& net, const Matrix& inputs);

}  // namespace reid
