#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reid/matrix.hpp"

namespace reid {

struct LossConfig {
  double margin = 0.3;   // triplet hinge margin
  double balance = 1.0;  // weight of the triplet term in the combined loss

  void validate() const;
};

struct TripletLoss {
  double loss = 0.0;
  Matrix grad;  // d loss / d features
  // Mined partners per anchor (lowest index wins ties).
  std::vector<std::size_t> hardest_positive;
  std::vector<std::size_t> hardest_negative;
};

// Batch-hard triplet loss on squared Euclidean distances:
//   mean_i max(0, max_{y_j = y_i, j != i} |f_i - f_j|^2
//                 - min_{y_j != y_i} |f_i - f_j|^2 + margin)
// The gradient is the subgradient with inactive hinges contributing zero.
// Every identity must appear at least twice and at least two identities must
// be present.
TripletLoss batch_hard_triplet_loss(const Matrix& features, std::span<const int> labels,
                                    double margin);

struct CrossEntropyLoss {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits = (softmax - one_hot) / B
};

// Mean negative log-softmax of the true class. Labels must lie in [0, C).
CrossEntropyLoss cross_entropy_loss(const Matrix& logits, std::span<const int> labels);

struct CombinedLoss {
  double total = 0.0;
  double cross_entropy = 0.0;
  double triplet = 0.0;
  Matrix grad_features;
  Matrix grad_logits;
};

// total = cross_entropy(logits) + balance * triplet(features).
CombinedLoss combined_loss(const Matrix& features, const Matrix& logits,
                           std::span<const int> labels, const LossConfig& cfg);

}  // namespace reid
