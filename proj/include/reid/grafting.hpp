#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "reid/matrix.hpp"
#include "reid/toy_net.hpp"
#include "reid/trainer.hpp"

namespace reid {

struct GraftConfig {
  double a_coef = 0.4;
  double c_coef = 1.0;
  std::size_t bins = 64;
  double clamp = 0.05;  // alpha is clamped to [clamp, 1 - clamp]
  // Test hook: when set, every alpha equals this value (1.0 disables grafting).
  std::optional<double> force_alpha;

  void validate() const;
};

// Shannon entropy (natural log) of an equal-width histogram of the values
// over [min, max]. A constant tensor has entropy 0.
double weight_entropy(std::span<const double> weights, std::size_t bins);

// a_coef * atan(c_coef * (h_self - h_other)) + 0.5, clamped. "self" is the
// network receiving the graft.
double graft_alpha(double h_self, double h_other, const GraftConfig& cfg);

// alpha * self + (1 - alpha) * other, element-wise. alpha must be in [0, 1].
std::vector<double> graft_layer(std::span<const double> w_self, std::span<const double> w_other,
                                double alpha);
Matrix graft_layer(const Matrix& w_self, const Matrix& w_other, double alpha);

struct GraftLayerRecord {
  std::size_t layer = 0;
  double alpha_m1 = 0.0;
  double alpha_m2 = 0.0;
  double entropy_m1 = 0.0;
  double entropy_m2 = 0.0;
};

struct GraftStepResult {
  ToyNet m1;
  ToyNet m2;
  std::vector<GraftLayerRecord> layers;
};

// Number of graftable layers: every dense layer plus the classifier.
std::size_t graft_layer_count(const ToyNet& net);

// Simultaneous mutual grafting. For each layer the entropies of both weight
// matrices are taken from the inputs, then
//   m1'[i] = a1 * m1[i] + (1 - a1) * m2[i],  a1 = graft_alpha(H(m1[i]), H(m2[i]))
//   m2'[i] = a2 * m2[i] + (1 - a2) * m1[i],  a2 = graft_alpha(H(m2[i]), H(m1[i]))
// Biases follow their layer's alpha; the BNNeck (all four vectors) follows
// the last dense layer.
GraftStepResult graft_step(const ToyNet& m1, const ToyNet& m2, const GraftConfig& cfg);

struct GraftTraceRow {
  std::size_t epoch = 0;
  GraftLayerRecord record;
};

struct ParallelGraftResult {
  ToyNet net1;  // the network used for evaluation
  ToyNet net2;
  std::vector<EpochStats> trace1;
  std::vector<EpochStats> trace2;
  std::vector<GraftTraceRow> grafts;
};

// Trains both nets one epoch at a time on separate threads and grafts them
// after every epoch. seed1/seed2 drive each trainer's batch sampling.
ParallelGraftResult parallel_train_with_grafting(const ToyNet& net1, const ToyNet& net2,
                                                 const TrainingSet& data, const TrainConfig& train_cfg,
                                                 const GraftConfig& graft_cfg, std::size_t epochs,
                                                 std::uint64_t seed1, std::uint64_t seed2);

// CSV with header `epoch,layer,alpha_m1,alpha_m2,entropy_m1,entropy_m2`.
void write_graft_trace(const std::vector<GraftTraceRow>& rows, const std::filesystem::path& path);

}  // namespace reid
