#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "reid/core_data.hpp"

namespace reid {

struct KMeansConfig {
  std::size_t k = 333;
  std::size_t max_iters = 300;
  double tol = 1e-6;  // stop when relative inertia improvement falls below this
  std::uint64_t seed = 0;
};

struct ClusterResult {
  std::vector<std::size_t> assignments;  // length N, values in [0, k)
  std::vector<double> centers;           // k x D, row-major
  std::size_t k = 0;
  std::size_t dim = 0;
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  // Inertia after every assignment step, first entry from the seeded centers.
  std::vector<double> inertia_history;

  std::vector<std::size_t> cluster_sizes() const;
};

// Lloyd's algorithm from k-means++ seeding. Distances and centers are in f64.
// Empty clusters are re-seeded to the point farthest from its own center.
// Deterministic for a given (features, cfg).
ClusterResult kmeans(const FeatureSet& features, const KMeansConfig& cfg);

// Every cluster with at least min_cluster_size members gets identity
// identity_offset + (dense rank of the cluster index among survivors).
// Members of smaller clusters are left out. Camera is 0.
LabelTable assign_fake_labels(const ClusterResult& result, const std::vector<std::string>& ids,
                              int identity_offset, std::size_t min_cluster_size = 1);

// Union of two label tables whose image ids and identity sets are disjoint.
LabelTable merge_datasets(const LabelTable& a, const LabelTable& b);

struct SelfValSplit {
  LabelTable train;
  LabelTable val;
};

// Moves n_val_ids identities, chosen uniformly with the seed, wholly into val.
SelfValSplit selfval_split(const LabelTable& labels, std::size_t n_val_ids, std::uint64_t seed);

}  // namespace reid
