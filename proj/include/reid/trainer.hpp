#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reid/core_data.hpp"
#include "reid/losses.hpp"
#include "reid/toy_net.hpp"

namespace reid {

struct LrSchedule {
  double base_lr = 0.03;
  std::size_t warmup_epochs = 0;
  std::vector<std::size_t> decay_epochs = {300, 600, 900};
  double decay_factor = 0.1;

  void validate() const;
};

// Linear ramp from 0 to base_lr over the warmup epochs, times
// decay_factor^(number of decay epochs <= epoch).
double lr_at(const LrSchedule& schedule, std::size_t epoch);

struct PkBatchSpec {
  std::size_t p = 4;  // identities per batch
  std::size_t k = 4;  // instances per identity

  std::size_t batch_size() const { return p * k; }
  void validate() const;
};

// Draws p distinct identities, then k images of each: without replacement
// when the identity has at least k images, with replacement otherwise.
// Returns image ids grouped by identity.
std::vector<std::string> pk_sample(const LabelTable& labels, const PkBatchSpec& spec,
                                   std::uint64_t seed);

struct TrainConfig {
  LossConfig loss;
  LrSchedule schedule;
  PkBatchSpec batch;
  double momentum = 0.9;
  // 0 means max(1, images / batch size).
  std::size_t batches_per_epoch = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_triplet = 0.0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

// Training inputs: one feature row per labelled image, identities mapped to
// dense class indices in ascending order.
class TrainingSet {
 public:
  TrainingSet(const FeatureSet& features, const LabelTable& labels);

  const FeatureSet& features() const { return features_; }
  const LabelTable& labels() const { return labels_; }
  std::size_t classes() const { return identities_.size(); }
  int class_of(const std::string& id) const;

  // Rows and class indices for a list of image ids.
  Matrix gather(const std::vector<std::string>& ids) const;
  std::vector<int> classes_of(const std::vector<std::string>& ids) const;

 private:
  FeatureSet features_;
  LabelTable labels_;
  std::vector<int> identities_;
};

// Plain SGD with momentum over PK batches, one epoch per call.
class Trainer {
 public:
  Trainer(ToyNet net, const TrainingSet& data, TrainConfig cfg, std::uint64_t seed);

  EpochStats run_epoch();

  const ToyNet& net() const { return net_; }
  ToyNet& net() { return net_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<EpochStats>& trace() const { return trace_; }

 private:
  ToyNet net_;
  ToyNet velocity_;
  const TrainingSet& data_;
  TrainConfig cfg_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::vector<EpochStats> trace_;
};

struct TrainResult {
  ToyNet net;
  std::vector<EpochStats> trace;
};

TrainResult train(const ToyNet& net, const TrainingSet& data, const TrainConfig& cfg,
                  std::size_t epochs, std::uint64_t seed);

// Combined loss over the whole set with the net in eval mode.
CombinedLoss evaluate_loss(const ToyNet& net, const TrainingSet& data, const LossConfig& cfg);

// CSV with header `epoch,lr,loss_total,loss_ce,loss_triplet`.
void write_loss_trace(const std::vector<EpochStats>& trace, const std::filesystem::path& path);

}  // namespace reid
