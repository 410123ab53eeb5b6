#include "reid/toy_net.hpp"

#include <cmath>
#include <string>

#include "reid/errors.hpp"
#include "reid/rng.hpp"

namespace reid {
namespace {

struct BnCache {
  Matrix normalized;  // x-hat
  std::vector<double> inv_std;
};

// Batch statistics normalisation shared by bnneck_forward and backprop.
Matrix bn_train_normalize(const Matrix& x, const BatchNorm& bn, BnCache* cache,
                          std::vector<double>* mean_out, std::vector<double>* var_out) {
  const std::size_t b = x.rows;
  const std::size_t f = x.cols;
  if (b < 2) throw ValidationError("BNNeck in train mode needs a batch of at least 2");
  if (bn.gamma.size() != f) throw ValidationError("BNNeck width does not match its input");
  std::vector<double> mean(f, 0.0);
  std::vector<double> var(f, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < f; ++j) mean[j] += x(i, j);
  }
  for (auto& m : mean) m /= double(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      const double d = x(i, j) - mean[j];
      var[j] += d * d;
    }
  }
  for (auto& v : var) v /= double(b);

  Matrix y(b, f);
  Matrix xhat(b, f);
  std::vector<double> inv_std(f);
  for (std::size_t j = 0; j < f; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + bn.eps);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      xhat(i, j) = (x(i, j) - mean[j]) * inv_std[j];
      y(i, j) = bn.gamma[j] * xhat(i, j) + bn.beta[j];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  if (mean_out) *mean_out = std::move(mean);
  if (var_out) *var_out = std::move(var);
  return y;
}

Matrix bn_eval(const Matrix& x, const BatchNorm& bn) {
  if (bn.gamma.size() != x.cols) throw ValidationError("BNNeck width does not match its input");
  Matrix y(x.rows, x.cols);
  for (std::size_t j = 0; j < x.cols; ++j) {
    const double inv_std = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
    for (std::size_t i = 0; i < x.rows; ++i) {
      y(i, j) = bn.gamma[j] * (x(i, j) - bn.running_mean[j]) * inv_std + bn.beta[j];
    }
  }
  return y;
}

Matrix dense_forward(const Matrix& x, const DenseLayer& layer) {
  Matrix z = multiply_transposed(x, layer.weight);
  for (std::size_t i = 0; i < z.rows; ++i) {
    for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += layer.bias[j];
  }
  return z;
}

void relu_inplace(Matrix& m) {
  for (auto& v : m.data) v = v > 0.0 ? v : 0.0;
}

void check_inputs(const ToyNet& net, const Matrix& inputs) {
  if (net.layers.empty()) throw ValidationError("toy net has no layers");
  if (inputs.cols != net.input_dim()) {
    throw ValidationError("input width " + std::to_string(inputs.cols) + " does not match net input " +
                          std::to_string(net.input_dim()));
  }
}

}  // namespace

Matrix backbone_features(const ToyNet& net, const Matrix& inputs) {
  check_inputs(net, inputs);
  Matrix a = inputs;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    a = dense_forward(a, net.layers[l]);
    if (l + 1 < net.layers.size()) relu_inplace(a);
  }
  return a;
}

BatchNorm BatchNorm::identity(std::size_t features) {
  BatchNorm bn;
  bn.gamma.assign(features, 1.0);
  bn.beta.assign(features, 0.0);
  bn.running_mean.assign(features, 0.0);
  bn.running_var.assign(features, 1.0);
  return bn;
}

Matrix bnneck_forward(const Matrix& x, BatchNorm& bn, BnMode mode) {
  if (mode == BnMode::eval) return bn_eval(x, bn);
  std::vector<double> mean;
  std::vector<double> var;
  Matrix y = bn_train_normalize(x, bn, nullptr, &mean, &var);
  const double unbias = double(x.rows) / double(x.rows - 1);
  for (std::size_t j = 0; j < x.cols; ++j) {
    bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mean[j];
    bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var[j] * unbias;
  }
  return y;
}

void ToyNet::validate() const {
  if (layers.empty()) throw ValidationError("toy net has no layers");
  auto finite = [](std::span<const double> xs) {
    for (double v : xs) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.data.size() != layer.weight.rows * layer.weight.cols ||
        layer.bias.size() != layer.weight.rows) {
      throw ValidationError("layer " + std::to_string(l) + " has inconsistent shapes");
    }
    if (l > 0 && layer.weight.cols != layers[l - 1].weight.rows) {
      throw ValidationError("layer " + std::to_string(l) + " input does not chain with layer " +
                            std::to_string(l - 1));
    }
  }
  if (classifier.cols != embedding_dim()) {
    throw ValidationError("classifier width does not match the embedding dimension");
  }
  if (bnneck && (bnneck->gamma.size() != embedding_dim() || bnneck->beta.size() != embedding_dim() ||
                 bnneck->running_mean.size() != embedding_dim() ||
                 bnneck->running_var.size() != embedding_dim())) {
    throw ValidationError("BNNeck width does not match the embedding dimension");
  }
  for (auto block : trainable_parameters(*this)) {
    if (!finite(block)) throw ValidationError("toy net has a non-finite parameter");
  }
}

ToyNet make_toy_net(const ToyNetShape& shape, std::uint64_t seed) {
  if (shape.input_dim == 0 || shape.embedding_dim == 0 || shape.classes == 0) {
    throw ValidationError("toy net dimensions must be positive");
  }
  Rng rng(seed);
  ToyNet net;
  std::size_t in = shape.input_dim;
  auto add_layer = [&](std::size_t out) {
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    const double scale = std::sqrt(2.0 / double(in));
    for (auto& w : layer.weight.data) w = scale * rng.normal();
    net.layers.push_back(std::move(layer));
    in = out;
  };
  for (std::size_t h : shape.hidden) add_layer(h);
  add_layer(shape.embedding_dim);
  if (shape.bnneck) net.bnneck = BatchNorm::identity(shape.embedding_dim);
  net.classifier = Matrix(shape.classes, shape.embedding_dim);
  const double scale = 1.0 / std::sqrt(double(shape.embedding_dim));
  for (auto& w : net.classifier.data) w = scale * rng.normal();
  return net;
}

std::vector<std::span<double>> trainable_parameters(ToyNet& net) {
  std::vector<std::span<double>> out;
  for (auto& layer : net.layers) {
    out.emplace_back(layer.weight.data);
    out.emplace_back(layer.bias);
  }
  if (net.bnneck) {
    out.emplace_back(net.bnneck->gamma);
    out.emplace_back(net.bnneck->beta);
  }
  out.emplace_back(net.classifier.data);
  return out;
}

std::vector<std::span<const double>> trainable_parameters(const ToyNet& net) {
  auto mutable_blocks = trainable_parameters(const_cast<ToyNet&>(net));
  return {mutable_blocks.begin(), mutable_blocks.end()};
}

ToyNet zeros_like(const ToyNet& net) {
  ToyNet z = net;
  for (auto block : trainable_parameters(z)) std::fill(block.begin(), block.end(), 0.0);
  if (z.bnneck) {
    std::fill(z.bnneck->running_mean.begin(), z.bnneck->running_mean.end(), 0.0);
    std::fill(z.bnneck->running_var.begin(), z.bnneck->running_var.end(), 0.0);
  }
  return z;
}

NetLoss net_loss_and_gradients(const ToyNet& net, const Matrix& inputs,
                               std::span<const int> labels, const LossConfig& cfg) {
  check_inputs(net, inputs);
  const std::size_t nl = net.layers.size();

  // Forward, keeping every layer input and pre-activation.
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_act;
  layer_inputs.reserve(nl);
  pre_act.reserve(nl);
  Matrix a = inputs;
  for (std::size_t l = 0; l < nl; ++l) {
    layer_inputs.push_back(a);
    Matrix z = dense_forward(a, net.layers[l]);
    pre_act.push_back(z);
    if (l + 1 < nl) relu_inplace(z);
    a = std::move(z);
  }
  const Matrix& embedding = a;

  BnCache bn_cache;
  Matrix neck = net.bnneck ? bn_train_normalize(embedding, *net.bnneck, &bn_cache, nullptr, nullptr)
                           : embedding;
  const Matrix logits = multiply_transposed(neck, net.classifier);

  NetLoss out;
  out.loss = combined_loss(embedding, logits, labels, cfg);
  out.grads = zeros_like(net);

  // Classifier.
  const Matrix& dlogits = out.loss.grad_logits;
  out.grads.classifier = transposed_multiply(dlogits, neck);
  Matrix dneck = multiply(dlogits, net.classifier);

  // BNNeck.
  Matrix dembed = out.loss.grad_features;
  if (net.bnneck) {
    const std::size_t b = embedding.rows;
    const std::size_t f = embedding.cols;
    const Matrix& xhat = bn_cache.normalized;
    for (std::size_t j = 0; j < f; ++j) {
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < b; ++i) {
        sum_dy += dneck(i, j);
        sum_dy_xhat += dneck(i, j) * xhat(i, j);
      }
      out.grads.bnneck->gamma[j] = sum_dy_xhat;
      out.grads.bnneck->beta[j] = sum_dy;
      const double g = net.bnneck->gamma[j];
      const double k = g * bn_cache.inv_std[j] / double(b);
      for (std::size_t i = 0; i < b; ++i) {
        dembed(i, j) += k * (double(b) * dneck(i, j) - sum_dy - xhat(i, j) * sum_dy_xhat);
      }
    }
  } else {
    for (std::size_t k = 0; k < dembed.data.size(); ++k) dembed.data[k] += dneck.data[k];
  }

  // Dense stack.
  Matrix delta = std::move(dembed);
  for (std::size_t l = nl; l-- > 0;) {
    if (l + 1 < nl) {
      for (std::size_t k = 0; k < delta.data.size(); ++k) {
        if (pre_act[l].data[k] <= 0.0) delta.data[k] = 0.0;
      }
    }
    auto& g = out.grads.layers[l];
    g.weight = transposed_multiply(delta, layer_inputs[l]);
    for (std::size_t j = 0; j < delta.cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < delta.rows; ++i) s += delta(i, j);
      g.bias[j] = s;
    }
    if (l > 0) delta = multiply(delta, net.layers[l].weight);
  }
  return out;
}

Matrix embed(const ToyNet& net, const Matrix& inputs) {
  Matrix f = backbone_features(net, inputs);
  return net.bnneck ? bn_eval(f, *net.bnneck) : f;
}

Matrix predict_logits(const ToyNet& net, const Matrix& inputs) {
  return multiply_transposed(embed(net, inputs), net.classifier);
}

}  // namespace reid
