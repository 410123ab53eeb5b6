#pragma once

#include <cstddef>
#include <optional>

#include "reid/core_data.hpp"
#include "reid/metrics.hpp"

namespace reid {

struct RerankConfig {
  std::size_t k1 = 20;  // reciprocal neighbourhood size
  std::size_t k2 = 6;   // local query expansion size
  double lambda = 0.3;  // weight of the original distance in the final mix

  void validate() const;
};

// k-reciprocal re-ranking over the union of queries and gallery.
//
// Neighbour lists are taken over the union distance matrix
//   [ qq  qg ]
//   [ qg' gg ]
// sorted ascending with ties broken by index. N(p, k) denotes the first k + 1
// entries of p's list (p itself is normally the first). For every probe p:
//
//   R*(p, k)  = { g in N(p, k) : p in N(g, k) }
//   E(p)      = R*(p, k1) plus R*(q, ceil(k1/2)) for every q in R*(p, k1) with
//               |R*(q, ceil(k1/2)) & R*(p, k1)| >= 2/3 |R*(q, ceil(k1/2))|
//   V(p, g)   = exp(-d(p, g) / s_p) for g in E(p), 0 elsewhere, L1-normalised,
//               where s_p is the largest distance within N(p, k1)
//   V(p, .)  <- mean of V(n, .) over the first k2 entries of p's list
//   dJ(p, g)  = 1 - sum_i min(V(p,i), V(g,i)) / sum_i max(V(p,i), V(g,i))
//
// The result, for query rows and gallery columns, is
//   (1 - lambda) * dJ + lambda * dist_qg.
//
// dist_qq and dist_gg must be exactly symmetric with a zero diagonal, and k1
// must be smaller than Q + G.
DistanceMatrix k_reciprocal_rerank(const DistanceMatrix& dist_qg, const DistanceMatrix& dist_qq,
                                   const DistanceMatrix& dist_gg, const RerankConfig& cfg = {});

// Convenience overload computing the three matrices with `metric`.
DistanceMatrix k_reciprocal_rerank(const FeatureSet& queries, const FeatureSet& gallery,
                                   Metric metric, const RerankConfig& cfg = {});

struct QueryExpansionConfig {
  std::size_t top_k = 5;
  std::size_t rounds = 2;

  void validate() const;
};

// Each round replaces every query by the mean of itself and its current top-K
// gallery features (K + 1 vectors). The gallery is not modified.
FeatureSet query_expansion(const FeatureSet& queries, const FeatureSet& gallery, Metric metric,
                           const QueryExpansionConfig& cfg = {});

struct TrackMergeConfig {
  std::optional<std::size_t> per_track_limit;  // T; unset = whole track

  void validate() const;
};

// For each track, the first min(T, length) listed members are replaced by
// their mean. Everything else is copied unchanged.
FeatureSet gallery_track_merge(const FeatureSet& gallery, const TrackTable& tracks,
                               const TrackMergeConfig& cfg = {});

}  // namespace reid
