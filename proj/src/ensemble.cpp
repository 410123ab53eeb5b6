#include "reid/ensemble.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "reid/errors.hpp"

namespace reid {
namespace {

void check_same_ids(std::span<const FeatureSet> sets) {
  if (sets.empty()) throw ValidationError("ensemble needs at least one feature set");
  for (std::size_t s = 1; s < sets.size(); ++s) {
    if (sets[s].ids() != sets[0].ids()) {
      throw ValidationError("feature set " + std::to_string(s) +
                            " does not share the id list of feature set 0");
    }
  }
}

}  // namespace

EnsembleStrategy parse_ensemble_strategy(std::string_view name) {
  if (name == "concat" || name == "concat_features") return EnsembleStrategy::concat_features;
  if (name == "average_features" || name == "avg-features") {
    return EnsembleStrategy::average_features;
  }
  if (name == "average_distance" || name == "avg-distance") {
    return EnsembleStrategy::average_distance;
  }
  throw ValidationError("unknown ensemble strategy '" + std::string(name) + "'");
}

std::string_view ensemble_strategy_name(EnsembleStrategy s) {
  switch (s) {
    case EnsembleStrategy::concat_features: return "concat_features";
    case EnsembleStrategy::average_features: return "average_features";
    case EnsembleStrategy::average_distance: return "average_distance";
  }
  return "";
}

FeatureSet l2_normalize(const FeatureSet& set) {
  const std::size_t dim = set.dim();
  std::vector<float> data(set.data().size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto row = set.row(i);
    double sq = 0.0;
    for (float v : row) sq += double(v) * double(v);
    const double norm = std::sqrt(sq);
    if (norm == 0.0) {
      throw ValidationError("cannot L2-normalise zero row '" + set.ids()[i] + "'");
    }
    for (std::size_t d = 0; d < dim; ++d) data[i * dim + d] = static_cast<float>(row[d] / norm);
  }
  return FeatureSet(set.ids(), dim, std::move(data));
}

FeatureSet concat_features(std::span<const FeatureSet> sets) {
  check_same_ids(sets);
  std::vector<FeatureSet> normed;
  normed.reserve(sets.size());
  std::size_t total_dim = 0;
  for (const auto& s : sets) {
    normed.push_back(l2_normalize(s));
    total_dim += s.dim();
  }
  const std::size_t n = sets[0].size();
  std::vector<float> data;
  data.reserve(n * total_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& s : normed) {
      auto row = s.row(i);
      data.insert(data.end(), row.begin(), row.end());
    }
  }
  return FeatureSet(sets[0].ids(), total_dim, std::move(data));
}

FeatureSet average_features(std::span<const FeatureSet> sets) {
  check_same_ids(sets);
  const std::size_t dim = sets[0].dim();
  for (std::size_t s = 1; s < sets.size(); ++s) {
    if (sets[s].dim() != dim) {
      throw ValidationError("feature set " + std::to_string(s) + " has dimension " +
                            std::to_string(sets[s].dim()) + ", expected " + std::to_string(dim));
    }
  }
  std::vector<double> acc(sets[0].data().size(), 0.0);
  for (const auto& s : sets) {
    const FeatureSet normed = l2_normalize(s);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += normed.data()[k];
  }
  std::vector<float> data(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) {
    data[k] = static_cast<float>(acc[k] / double(sets.size()));
  }
  return FeatureSet(sets[0].ids(), dim, std::move(data));
}

DistanceMatrix average_distance(std::span<const DistanceMatrix> mats) {
  if (mats.empty()) throw ValidationError("average_distance needs at least one matrix");
  const std::size_t rows = mats[0].rows();
  const std::size_t cols = mats[0].cols();
  for (std::size_t m = 1; m < mats.size(); ++m) {
    if (mats[m].rows() != rows || mats[m].cols() != cols) {
      throw ValidationError("distance matrix " + std::to_string(m) + " shape does not match matrix 0");
    }
  }
  std::vector<double> acc(rows * cols, 0.0);
  for (const auto& m : mats) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += m.values()[k];
  }
  for (auto& v : acc) v /= double(mats.size());
  return DistanceMatrix(rows, cols, std::move(acc));
}

}  // namespace reid
