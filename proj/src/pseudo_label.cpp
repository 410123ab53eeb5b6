#include "reid/pseudo_label.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "reid/errors.hpp"
#include "reid/rng.hpp"

namespace reid {
namespace {

double squared_distance(std::span<const float> x, const double* c, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = double(x[d]) - c[d];
    acc += diff * diff;
  }
  return acc;
}

void set_center(std::vector<double>& centers, std::size_t c, std::span<const float> x) {
  const std::size_t dim = x.size();
  for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] = x[d];
}

// k-means++: first center uniform, then proportional to squared distance to
// the nearest chosen center. Ties in the cumulative walk resolve to the
// lowest index; when every remaining point coincides with a center the
// lowest unchosen index is taken.
std::vector<double> seed_centers(const FeatureSet& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.size();
  const std::size_t dim = x.dim();
  std::vector<double> centers(k * dim);
  std::vector<char> chosen(n, 0);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : nearest[i];
      pick = n;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double cumulative = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i] || nearest[i] <= 0.0) continue;
          cumulative += nearest[i];
          pick = i;
          if (cumulative > target) break;
        }
      }
      if (pick == n) {
        pick = std::size_t(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
      }
    }
    chosen[pick] = 1;
    set_center(centers, c, x.row(pick));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(x.row(i), &centers[c * dim], dim));
    }
  }
  return centers;
}

// Assigns each point to its nearest center (lowest index on ties) and returns
// the inertia.
double assign(const FeatureSet& x, const std::vector<double>& centers, std::size_t k,
              std::vector<std::size_t>& assignments, std::vector<double>& point_cost) {
  const std::size_t dim = x.dim();
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double d = squared_distance(x.row(i), &centers[c * dim], dim);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    assignments[i] = arg;
    point_cost[i] = best;
    inertia += best;
  }
  return inertia;
}

}  // namespace

std::vector<std::size_t> ClusterResult::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignments) ++sizes[a];
  return sizes;
}

ClusterResult kmeans(const FeatureSet& features, const KMeansConfig& cfg) {
  const std::size_t n = features.size();
  const std::size_t dim = features.dim();
  if (cfg.k < 1) throw ValidationError("k-means k must be >= 1");
  if (cfg.k > n) {
    throw ValidationError("k-means k = " + std::to_string(cfg.k) + " exceeds point count " +
                          std::to_string(n));
  }
  if (cfg.max_iters < 1) throw ValidationError("k-means max_iters must be >= 1");
  if (!(cfg.tol >= 0.0)) throw ValidationError("k-means tol must be >= 0");

  Rng rng(cfg.seed);
  ClusterResult result;
  result.k = cfg.k;
  result.dim = dim;
  result.centers = seed_centers(features, cfg.k, rng);
  result.assignments.assign(n, 0);
  std::vector<double> point_cost(n);
  result.inertia = assign(features, result.centers, cfg.k, result.assignments, point_cost);
  result.inertia_history.push_back(result.inertia);

  std::vector<double> sums(cfg.k * dim);
  std::vector<std::size_t> counts(cfg.k);
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    // Update step, accumulating members in index order.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignments[i];
      ++counts[c];
      auto row = features.row(i);
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += row[d];
    }
    std::vector<char> taken(n, 0);
    for (std::size_t c = 0; c < cfg.k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          result.centers[c * dim + d] = sums[c * dim + d] / double(counts[c]);
        }
        continue;
      }
      // Empty cluster: move it onto the worst-served point not yet used.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (far == n || point_cost[i] > point_cost[far]) far = i;
      }
      taken[far] = 1;
      set_center(result.centers, c, features.row(far));
    }

    previous = result.assignments;
    const double before = result.inertia;
    result.inertia = assign(features, result.centers, cfg.k, result.assignments, point_cost);
    result.inertia_history.push_back(result.inertia);
    result.iterations_run = iter + 1;

    if (result.assignments == previous) break;
    if (before <= 0.0 || (before - result.inertia) / before < cfg.tol) break;
  }
  return result;
}

LabelTable assign_fake_labels(const ClusterResult& result, const std::vector<std::string>& ids,
                              int identity_offset, std::size_t min_cluster_size) {
  if (identity_offset < 0) throw ValidationError("identity offset must be >= 0");
  if (ids.size() != result.assignments.size()) {
    throw ValidationError("id count does not match the clustered point count");
  }
  const auto sizes = result.cluster_sizes();
  std::vector<int> label_of(result.k, -1);
  int next = identity_offset;
  for (std::size_t c = 0; c < result.k; ++c) {
    if (sizes[c] > 0 && sizes[c] >= min_cluster_size) label_of[c] = next++;
  }
  LabelTable table;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int identity = label_of[result.assignments[i]];
    if (identity >= 0) table.add(ids[i], Label{identity, 0});
  }
  return table;
}

LabelTable merge_datasets(const LabelTable& a, const LabelTable& b) {
  const auto ida = a.identities();
  const auto idb = b.identities();
  std::vector<int> common;
  std::set_intersection(ida.begin(), ida.end(), idb.begin(), idb.end(), std::back_inserter(common));
  if (!common.empty()) {
    throw ValidationError("identity " + std::to_string(common.front()) +
                          " appears in both label tables");
  }
  LabelTable merged = a;
  for (const auto& [id, label] : b.entries()) {
    if (a.find(id)) throw ValidationError("image id '" + id + "' appears in both label tables");
    merged.add(id, label);
  }
  return merged;
}

SelfValSplit selfval_split(const LabelTable& labels, std::size_t n_val_ids, std::uint64_t seed) {
  auto identities = labels.identities();
  if (n_val_ids > identities.size()) {
    throw ValidationError("cannot move " + std::to_string(n_val_ids) + " identities to val; only " +
                          std::to_string(identities.size()) + " exist");
  }
  Rng rng(seed);
  rng.shuffle(identities.begin(), identities.end());
  const std::set<int> val_ids(identities.begin(), identities.begin() + std::ptrdiff_t(n_val_ids));
  SelfValSplit split;
  for (const auto& [id, label] : labels.entries()) {
    (val_ids.count(label.identity) ? split.val : split.train).add(id, label);
  }
  return split;
}

}  // namespace reid
