#pragma once

#include <span>
#include <string_view>

#include "reid/core_data.hpp"

namespace reid {

enum class EnsembleStrategy { concat_features, average_features, average_distance };

EnsembleStrategy parse_ensemble_strategy(std::string_view name);
std::string_view ensemble_strategy_name(EnsembleStrategy s);

// Divides every row by its Euclidean norm. A zero row is an error.
FeatureSet l2_normalize(const FeatureSet& set);

// Row-wise concatenation of the L2-normalised inputs. All inputs must share
// the same id list in the same order. Output rows have norm sqrt(n).
FeatureSet concat_features(std::span<const FeatureSet> sets);

// Element-wise mean of the L2-normalised inputs (same ids, same dims).
FeatureSet average_features(std::span<const FeatureSet> sets);

// Element-wise mean of equally shaped distance matrices.
DistanceMatrix average_distance(std::span<const DistanceMatrix> mats);

}  // namespace reid
