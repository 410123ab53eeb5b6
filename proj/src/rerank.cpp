#include "reid/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "reid/errors.hpp"

namespace reid {
namespace {

// Square union-distance matrix with per-row sorted neighbour lists.
class UnionGraph {
 public:
  UnionGraph(const DistanceMatrix& qg, const DistanceMatrix& qq, const DistanceMatrix& gg)
      : nq_(qq.rows()), n_(qq.rows() + gg.rows()), dist_(n_ * n_), order_(n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) dist_[i * n_ + j] = lookup(qg, qq, gg, i, j);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      auto& o = order_[i];
      o.resize(n_);
      std::iota(o.begin(), o.end(), std::size_t{0});
      const double* row = &dist_[i * n_];
      std::stable_sort(o.begin(), o.end(), [row](std::size_t a, std::size_t b) {
        return row[a] < row[b];
      });
    }
  }

  std::size_t size() const { return n_; }
  double dist(std::size_t i, std::size_t j) const { return dist_[i * n_ + j]; }
  const std::vector<std::size_t>& order(std::size_t i) const { return order_[i]; }

  // Is p among the first k + 1 neighbours of g?
  bool in_neighbourhood(std::size_t g, std::size_t p, std::size_t k) const {
    const auto& o = order_[g];
    return std::find(o.begin(), o.begin() + std::ptrdiff_t(k + 1), p) !=
           o.begin() + std::ptrdiff_t(k + 1);
  }

  // R*(p, k): members of p's first k + 1 neighbours that list p among theirs.
  std::vector<std::size_t> reciprocal(std::size_t p, std::size_t k) const {
    std::vector<std::size_t> out;
    const std::size_t m = std::min(k + 1, n_);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t g = order_[p][r];
      if (in_neighbourhood(g, p, std::min(k, n_ - 1))) out.push_back(g);
    }
    return out;
  }

 private:
  double lookup(const DistanceMatrix& qg, const DistanceMatrix& qq, const DistanceMatrix& gg,
                std::size_t i, std::size_t j) const {
    if (i < nq_) return j < nq_ ? qq(i, j) : qg(i, j - nq_);
    return j < nq_ ? qg(j, i - nq_) : gg(i - nq_, j - nq_);
  }

  std::size_t nq_;
  std::size_t n_;
  std::vector<double> dist_;
  std::vector<std::vector<std::size_t>> order_;
};

void check_square(const DistanceMatrix& m, const char* name) {
  if (m.rows() != m.cols()) throw ValidationError(std::string(name) + " must be square");
  m.validate();
  if (!m.is_symmetric()) throw ValidationError(std::string(name) + " is not symmetric");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (m(i, i) != 0.0) throw ValidationError(std::string(name) + " has a non-zero diagonal");
  }
}

}  // namespace

void RerankConfig::validate() const {
  if (k1 < 1 || k2 < 1) throw ValidationError("rerank k1 and k2 must be >= 1");
  if (k2 > k1) throw ValidationError("rerank k2 must not exceed k1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("rerank lambda must be in [0, 1]");
}

DistanceMatrix k_reciprocal_rerank(const DistanceMatrix& dist_qg, const DistanceMatrix& dist_qq,
                                   const DistanceMatrix& dist_gg, const RerankConfig& cfg) {
  cfg.validate();
  check_square(dist_qq, "query-query distance");
  check_square(dist_gg, "gallery-gallery distance");
  dist_qg.validate();
  const std::size_t nq = dist_qq.rows();
  const std::size_t ng = dist_gg.rows();
  if (dist_qg.rows() != nq || dist_qg.cols() != ng) {
    throw ValidationError("query-gallery distance shape does not match the query and gallery sizes");
  }
  const std::size_t n = nq + ng;
  if (cfg.k1 >= n) {
    throw ValidationError("rerank k1 = " + std::to_string(cfg.k1) +
                          " must be smaller than the union size " + std::to_string(n));
  }

  const UnionGraph graph(dist_qg, dist_qq, dist_gg);
  const std::size_t half = (cfg.k1 + 1) / 2;

  std::vector<std::vector<std::size_t>> recip_half(n);
  for (std::size_t p = 0; p < n; ++p) recip_half[p] = graph.reciprocal(p, half);

  // Gaussian-kernel encoding of the expanded reciprocal sets.
  std::vector<double> v(n * n, 0.0);
  std::vector<char> in_core(n, 0);
  std::vector<char> in_expanded(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const auto core = graph.reciprocal(p, cfg.k1);
    std::fill(in_core.begin(), in_core.end(), 0);
    std::fill(in_expanded.begin(), in_expanded.end(), 0);
    for (std::size_t g : core) in_core[g] = in_expanded[g] = 1;

    for (std::size_t cand : core) {
      const auto& sub = recip_half[cand];
      std::size_t overlap = 0;
      for (std::size_t g : sub) overlap += in_core[g];
      if (3 * overlap >= 2 * sub.size()) {
        for (std::size_t g : sub) in_expanded[g] = 1;
      }
    }

    double scale = 0.0;
    for (std::size_t r = 0; r <= cfg.k1; ++r) scale = std::max(scale, graph.dist(p, graph.order(p)[r]));
    if (scale <= 0.0) scale = 1.0;

    double* row = &v[p * n];
    double total = 0.0;
    for (std::size_t g = 0; g < n; ++g) {
      if (!in_expanded[g]) continue;
      row[g] = std::exp(-graph.dist(p, g) / scale);
      total += row[g];
    }
    for (std::size_t g = 0; g < n; ++g) row[g] /= total;
  }

  // Local query expansion over the k2 nearest neighbours.
  if (cfg.k2 > 1) {
    std::vector<double> expanded(n * n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      double* out = &expanded[p * n];
      for (std::size_t r = 0; r < cfg.k2; ++r) {
        const double* src = &v[graph.order(p)[r] * n];
        for (std::size_t g = 0; g < n; ++g) out[g] += src[g];
      }
      for (std::size_t g = 0; g < n; ++g) out[g] /= double(cfg.k2);
    }
    v.swap(expanded);
  }

  DistanceMatrix out(nq, ng);
  for (std::size_t q = 0; q < nq; ++q) {
    const double* vq = &v[q * n];
    for (std::size_t g = 0; g < ng; ++g) {
      const double* vg = &v[(nq + g) * n];
      double mins = 0.0;
      double maxs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mins += std::min(vq[i], vg[i]);
        maxs += std::max(vq[i], vg[i]);
      }
      const double jaccard = 1.0 - mins / maxs;
      out(q, g) = (1.0 - cfg.lambda) * jaccard + cfg.lambda * dist_qg(q, g);
    }
  }
  return out;
}

DistanceMatrix k_reciprocal_rerank(const FeatureSet& queries, const FeatureSet& gallery,
                                   Metric metric, const RerankConfig& cfg) {
  return k_reciprocal_rerank(distance_matrix(queries, gallery, metric),
                             distance_matrix(queries, queries, metric),
                             distance_matrix(gallery, gallery, metric), cfg);
}

void QueryExpansionConfig::validate() const {
  if (top_k < 1) throw ValidationError("query expansion top_k must be >= 1");
  if (rounds < 1) throw ValidationError("query expansion rounds must be >= 1");
}

FeatureSet query_expansion(const FeatureSet& queries, const FeatureSet& gallery, Metric metric,
                           const QueryExpansionConfig& cfg) {
  cfg.validate();
  if (queries.dim() != gallery.dim()) throw ValidationError("query/gallery dimension mismatch");
  if (cfg.top_k > gallery.size()) {
    throw ValidationError("query expansion top_k = " + std::to_string(cfg.top_k) +
                          " exceeds gallery size " + std::to_string(gallery.size()));
  }
  const std::size_t dim = queries.dim();
  FeatureSet current = queries;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const RankList ranks = rank(distance_matrix(current, gallery, metric));
    std::vector<float> data(current.size() * dim);
    std::vector<double> acc(dim);
    for (std::size_t q = 0; q < current.size(); ++q) {
      auto self = current.row(q);
      for (std::size_t d = 0; d < dim; ++d) acc[d] = self[d];
      for (std::size_t r = 0; r < cfg.top_k; ++r) {
        auto g = gallery.row(ranks[q][r]);
        for (std::size_t d = 0; d < dim; ++d) acc[d] += g[d];
      }
      for (std::size_t d = 0; d < dim; ++d) {
        data[q * dim + d] = static_cast<float>(acc[d] / double(cfg.top_k + 1));
      }
    }
    current = FeatureSet(current.ids(), dim, std::move(data));
  }
  return current;
}

void TrackMergeConfig::validate() const {
  if (per_track_limit && *per_track_limit < 1) {
    throw ValidationError("track merge per_track_limit must be >= 1");
  }
}

FeatureSet gallery_track_merge(const FeatureSet& gallery, const TrackTable& tracks,
                               const TrackMergeConfig& cfg) {
  cfg.validate();
  const std::size_t dim = gallery.dim();
  std::vector<float> data = gallery.data();
  std::vector<std::size_t> members;
  std::vector<double> acc(dim);
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    const auto& track = tracks.tracks()[t];
    members.clear();
    for (const auto& id : track) {
      const std::size_t idx = gallery.index_of(id);
      if (idx == FeatureSet::npos) {
        throw ValidationError("track " + std::to_string(t) + " lists unknown gallery id '" + id + "'");
      }
      members.push_back(idx);
    }
    const std::size_t used = std::min(members.size(), cfg.per_track_limit.value_or(members.size()));
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t m = 0; m < used; ++m) {
      auto row = gallery.row(members[m]);
      for (std::size_t d = 0; d < dim; ++d) acc[d] += row[d];
    }
    for (std::size_t m = 0; m < used; ++m) {
      for (std::size_t d = 0; d < dim; ++d) {
        data[members[m] * dim + d] = static_cast<float>(acc[d] / double(used));
      }
    }
  }
  return FeatureSet(gallery.ids(), dim, std::move(data));
}

}  // namespace reid
