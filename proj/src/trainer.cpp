#include "reid/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "reid/errors.hpp"
#include "reid/rng.hpp"

namespace reid {

void LrSchedule::validate() const {
  if (!(base_lr > 0.0)) throw ValidationError("base learning rate must be > 0");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    throw ValidationError("learning rate decay factor must be in (0, 1)");
  }
  for (std::size_t i = 1; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i] <= decay_epochs[i - 1]) {
      throw ValidationError("learning rate decay epochs must be strictly increasing");
    }
  }
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
  double lr = schedule.base_lr;
  if (epoch < schedule.warmup_epochs) lr *= double(epoch) / double(schedule.warmup_epochs);
  for (std::size_t d : schedule.decay_epochs) {
    if (d <= epoch) lr *= schedule.decay_factor;
  }
  return lr;
}

void PkBatchSpec::validate() const {
  if (p < 2) throw ValidationError("PK batches need p >= 2 identities");
  if (k < 2) throw ValidationError("PK batches need k >= 2 instances per identity");
}

std::vector<std::string> pk_sample(const LabelTable& labels, const PkBatchSpec& spec,
                                   std::uint64_t seed) {
  spec.validate();
  std::map<int, std::vector<std::string>> by_identity;
  for (const auto& [id, label] : labels.entries()) by_identity[label.identity].push_back(id);
  if (by_identity.size() < spec.p) {
    throw ValidationError("PK sampling needs " + std::to_string(spec.p) + " identities, only " +
                          std::to_string(by_identity.size()) + " available");
  }
  std::vector<const std::vector<std::string>*> pools;
  pools.reserve(by_identity.size());
  for (const auto& [_, images] : by_identity) pools.push_back(&images);

  Rng rng(seed);
  rng.shuffle(pools.begin(), pools.end());
  std::vector<std::string> batch;
  batch.reserve(spec.batch_size());
  for (std::size_t i = 0; i < spec.p; ++i) {
    std::vector<std::string> images = *pools[i];
    if (images.size() >= spec.k) {
      rng.shuffle(images.begin(), images.end());
      batch.insert(batch.end(), images.begin(), images.begin() + std::ptrdiff_t(spec.k));
    } else {
      for (std::size_t j = 0; j < spec.k; ++j) batch.push_back(images[rng.below(images.size())]);
    }
  }
  return batch;
}

TrainingSet::TrainingSet(const FeatureSet& features, const LabelTable& labels)
    : features_(features), labels_(labels), identities_(labels.identities()) {
  for (const auto& [id, _] : labels_.entries()) {
    if (!features_.contains(id)) {
      throw ValidationError("labelled image '" + id + "' has no feature row");
    }
  }
}

int TrainingSet::class_of(const std::string& id) const {
  const int identity = labels_.at(id).identity;
  return int(std::lower_bound(identities_.begin(), identities_.end(), identity) -
             identities_.begin());
}

Matrix TrainingSet::gather(const std::vector<std::string>& ids) const {
  Matrix out(ids.size(), features_.dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t row = features_.index_of(ids[i]);
    if (row == FeatureSet::npos) throw ValidationError("no feature row for '" + ids[i] + "'");
    auto src = features_.row(row);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::vector<int> TrainingSet::classes_of(const std::vector<std::string>& ids) const {
  std::vector<int> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(class_of(id));
  return out;
}

Trainer::Trainer(ToyNet net, const TrainingSet& data, TrainConfig cfg, std::uint64_t seed)
    : net_(std::move(net)), velocity_(zeros_like(net_)), data_(data), cfg_(std::move(cfg)),
      seed_(seed) {
  net_.validate();
  cfg_.loss.validate();
  cfg_.schedule.validate();
  cfg_.batch.validate();
  if (net_.input_dim() != data_.features().dim()) {
    throw ValidationError("net input width does not match the feature dimension");
  }
  if (net_.classes() != data_.classes()) {
    throw ValidationError("net has " + std::to_string(net_.classes()) + " classes, data has " +
                          std::to_string(data_.classes()));
  }
}

EpochStats Trainer::run_epoch() {
  const std::size_t batches =
      cfg_.batches_per_epoch
          ? cfg_.batches_per_epoch
          : std::max<std::size_t>(1, data_.labels().size() / cfg_.batch.batch_size());
  EpochStats stats;
  stats.epoch = epoch_;
  stats.lr = lr_at(cfg_.schedule, epoch_);

  for (std::size_t b = 0; b < batches; ++b) {
    const auto ids = pk_sample(data_.labels(), cfg_.batch, mix_seed(seed_, epoch_ * 100003 + b));
    const Matrix x = data_.gather(ids);
    const std::vector<int> y = data_.classes_of(ids);

    NetLoss step = net_loss_and_gradients(net_, x, y, cfg_.loss);
    stats.loss_total += step.loss.total;
    stats.loss_ce += step.loss.cross_entropy;
    stats.loss_triplet += step.loss.triplet;

    if (net_.bnneck) bnneck_forward(backbone_features(net_, x), *net_.bnneck, BnMode::train);

    auto params = trainable_parameters(net_);
    auto grads = trainable_parameters(std::as_const(step.grads));
    auto vel = trainable_parameters(velocity_);
    for (std::size_t blk = 0; blk < params.size(); ++blk) {
      for (std::size_t k = 0; k < params[blk].size(); ++k) {
        vel[blk][k] = cfg_.momentum * vel[blk][k] + grads[blk][k];
        params[blk][k] -= stats.lr * vel[blk][k];
      }
    }
  }
  stats.loss_total /= double(batches);
  stats.loss_ce /= double(batches);
  stats.loss_triplet /= double(batches);
  ++epoch_;
  trace_.push_back(stats);
  return stats;
}

TrainResult train(const ToyNet& net, const TrainingSet& data, const TrainConfig& cfg,
                  std::size_t epochs, std::uint64_t seed) {
  Trainer trainer(net, data, cfg, seed);
  for (std::size_t e = 0; e < epochs; ++e) trainer.run_epoch();
  return {trainer.net(), trainer.trace()};
}

CombinedLoss evaluate_loss(const ToyNet& net, const TrainingSet& data, const LossConfig& cfg) {
  std::vector<std::string> ids;
  for (const auto& [id, _] : data.labels().entries()) ids.push_back(id);
  const Matrix x = data.gather(ids);
  const Matrix features = backbone_features(net, x);
  const Matrix logits = multiply_transposed(embed(net, x), net.classifier);
  return combined_loss(features, logits, data.classes_of(ids), cfg);
}

void write_loss_trace(const std::vector<EpochStats>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "epoch,lr,loss_total,loss_ce,loss_triplet\n";
  char line[256];
  for (const auto& s : trace) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g,%.10g,%.10g\n", s.epoch, s.lr, s.loss_total,
                  s.loss_ce, s.loss_triplet);
    out << line;
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

}  // namespace reid
