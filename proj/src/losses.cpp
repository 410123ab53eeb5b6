#include "reid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "reid/errors.hpp"

namespace reid {
namespace {

double squared_distance(const Matrix& f, std::size_t a, std::size_t b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < f.cols; ++d) {
    const double diff = f(a, d) - f(b, d);
    acc += diff * diff;
  }
  return acc;
}

void check_batch_labels(std::span<const int> labels) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) throw ValidationError("triplet loss needs at least two identities in the batch");
  for (const auto& [id, n] : counts) {
    if (n < 2) {
      throw ValidationError("identity " + std::to_string(id) +
                            " has a single instance in the batch; triplet loss needs two");
    }
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(margin >= 0.0) || !std::isfinite(margin)) throw ValidationError("triplet margin must be finite and >= 0");
  if (!(balance >= 0.0) || !std::isfinite(balance)) throw ValidationError("loss balance must be finite and >= 0");
}

TripletLoss batch_hard_triplet_loss(const Matrix& features, std::span<const int> labels,
                                    double margin) {
  const std::size_t b = features.rows;
  if (labels.size() != b) throw ValidationError("label count does not match batch size");
  check_batch_labels(labels);

  TripletLoss out;
  out.grad = Matrix(b, features.cols);
  out.hardest_positive.resize(b);
  out.hardest_negative.resize(b);

  Matrix dist(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) dist(i, j) = dist(j, i) = squared_distance(features, i, j);
  }

  const double inv_b = 1.0 / double(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t pos = b;
    std::size_t neg = b;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        if (pos == b || dist(i, j) > dist(i, pos)) pos = j;
      } else if (neg == b || dist(i, j) < dist(i, neg)) {
        neg = j;
      }
    }
    out.hardest_positive[i] = pos;
    out.hardest_negative[i] = neg;

    const double term = dist(i, pos) - dist(i, neg) + margin;
    if (term <= 0.0) continue;
    out.loss += term * inv_b;
    for (std::size_t d = 0; d < features.cols; ++d) {
      const double to_pos = features(i, d) - features(pos, d);
      const double to_neg = features(i, d) - features(neg, d);
      out.grad(i, d) += 2.0 * (to_pos - to_neg) * inv_b;
      out.grad(pos, d) -= 2.0 * to_pos * inv_b;
      out.grad(neg, d) += 2.0 * to_neg * inv_b;
    }
  }
  return out;
}

CrossEntropyLoss cross_entropy_loss(const Matrix& logits, std::span<const int> labels) {
  const std::size_t b = logits.rows;
  const std::size_t c = logits.cols;
  if (labels.size() != b) throw ValidationError("label count does not match batch size");
  for (int l : labels) {
    if (l < 0 || std::size_t(l) >= c) {
      throw ValidationError("label " + std::to_string(l) + " outside [0, " + std::to_string(c) + ")");
    }
  }
  CrossEntropyLoss out;
  out.grad = Matrix(b, c);
  if (b == 0) return out;
  const double inv_b = 1.0 / double(b);
  for (std::size_t i = 0; i < b; ++i) {
    auto row = logits.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - peak);
    const double log_norm = peak + std::log(sum);
    out.loss -= (row[std::size_t(labels[i])] - log_norm) * inv_b;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(row[j] - log_norm);
      out.grad(i, j) = (p - (std::size_t(labels[i]) == j ? 1.0 : 0.0)) * inv_b;
    }
  }
  return out;
}

CombinedLoss combined_loss(const Matrix& features, const Matrix& logits,
                           std::span<const int> labels, const LossConfig& cfg) {
  cfg.validate();
  auto ce = cross_entropy_loss(logits, labels);
  CombinedLoss out;
  out.cross_entropy = ce.loss;
  out.grad_logits = std::move(ce.grad);
  if (cfg.balance == 0.0) {
    out.total = ce.loss;
    out.grad_features = Matrix(features.rows, features.cols);
    return out;
  }
  auto tri = batch_hard_triplet_loss(features, labels, cfg.margin);
  out.triplet = tri.loss;
  out.total = ce.loss + cfg.balance * tri.loss;
  out.grad_features = std::move(tri.grad);
  for (auto& g : out.grad_features.data) g *= cfg.balance;
  return out;
}

}  // namespace reid
