#include "reid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "reid/errors.hpp"

namespace reid {

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "cosine") return Metric::cosine;
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

std::string_view metric_name(Metric m) {
  return m == Metric::euclidean ? "euclidean" : "cosine";
}

DistanceMatrix distance_matrix(const FeatureSet& queries, const FeatureSet& gallery,
                               Metric metric) {
  if (queries.dim() != gallery.dim()) {
    throw ValidationError("dimension mismatch: queries have " + std::to_string(queries.dim()) +
                          ", gallery has " + std::to_string(gallery.dim()));
  }
  const std::size_t dim = queries.dim();
  DistanceMatrix out(queries.size(), gallery.size());

  if (metric == Metric::euclidean) {
    for (std::size_t i = 0; i < queries.size(); ++i) {
      auto a = queries.row(i);
      for (std::size_t j = 0; j < gallery.size(); ++j) {
        auto b = gallery.row(j);
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = double(a[d]) - double(b[d]);
          acc += diff * diff;
        }
        out(i, j) = std::sqrt(acc);
      }
    }
    return out;
  }

  auto norms = [](const FeatureSet& s, const char* which) {
    std::vector<double> n(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      double acc = 0.0;
      for (float v : s.row(i)) acc += double(v) * double(v);
      n[i] = std::sqrt(acc);
      if (n[i] == 0.0) {
        throw ValidationError(std::string("cosine distance undefined for zero vector '") +
                              s.ids()[i] + "' in " + which);
      }
    }
    return n;
  };
  const auto qn = norms(queries, "queries");
  const auto gn = norms(gallery, "gallery");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto a = queries.row(i);
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      auto b = gallery.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += double(a[d]) * double(b[d]);
      out(i, j) = std::max(0.0, 1.0 - dot / (qn[i] * gn[j]));
    }
  }
  return out;
}

RankList rank(const DistanceMatrix& dist) {
  RankList ranks(dist.rows());
  for (std::size_t i = 0; i < dist.rows(); ++i) {
    auto row = dist.row(i);
    auto& order = ranks[i];
    order.resize(dist.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
  }
  return ranks;
}

EvalResult evaluate(const RankList& ranks, const std::vector<std::string>& query_ids,
                    const std::vector<std::string>& gallery_ids, const LabelTable& query_labels,
                    const LabelTable& gallery_labels, const EvalOptions& options) {
  if (options.max_rank < 1) throw ValidationError("max_rank must be >= 1");
  if (options.top_k_map && *options.top_k_map < 1) throw ValidationError("top_k_map must be >= 1");
  if (ranks.size() != query_ids.size()) {
    throw ValidationError("rank list has " + std::to_string(ranks.size()) + " queries, expected " +
                          std::to_string(query_ids.size()));
  }
  validate_ranks(ranks, gallery_ids.size());

  std::vector<Label> glabels;
  glabels.reserve(gallery_ids.size());
  for (const auto& id : gallery_ids) glabels.push_back(gallery_labels.at(id));

  EvalResult result;
  result.per_query_ap.resize(ranks.size());
  std::vector<std::size_t> hits_at(options.max_rank, 0);
  double ap_sum = 0.0;

  for (std::size_t q = 0; q < ranks.size(); ++q) {
    const Label ql = query_labels.at(query_ids[q]);
    auto kept = [&](std::size_t g) {
      return !(options.cross_camera && glabels[g].identity == ql.identity &&
               glabels[g].camera == ql.camera);
    };
    auto relevant = [&](std::size_t g) { return glabels[g].identity == ql.identity; };

    std::size_t total_relevant = 0;
    for (std::size_t g = 0; g < glabels.size(); ++g) {
      if (kept(g) && relevant(g)) ++total_relevant;
    }
    if (total_relevant == 0) continue;

    std::size_t limit = ranks[q].size();
    std::size_t divisor = total_relevant;
    if (options.top_k_map) {
      limit = std::min(limit, *options.top_k_map);
      divisor = std::min(divisor, *options.top_k_map);
    }

    double precision_sum = 0.0;
    std::size_t position = 0;
    std::size_t hits = 0;
    std::optional<std::size_t> first_hit;
    for (std::size_t g : ranks[q]) {
      if (!kept(g)) continue;
      ++position;
      if (!relevant(g)) continue;
      if (!first_hit) first_hit = position - 1;
      if (position <= limit) {
        ++hits;
        precision_sum += double(hits) / double(position);
      }
    }
    const double ap = precision_sum / double(divisor);
    result.per_query_ap[q] = ap;
    ap_sum += ap;
    ++result.evaluated_queries;
    if (first_hit && *first_hit < options.max_rank) ++hits_at[*first_hit];
  }

  result.cmc.assign(options.max_rank, 0.0);
  if (result.evaluated_queries > 0) {
    const double n = double(result.evaluated_queries);
    result.map = ap_sum / n;
    std::size_t cumulative = 0;
    for (std::size_t r = 0; r < options.max_rank; ++r) {
      cumulative += hits_at[r];
      result.cmc[r] = double(cumulative) / n;
    }
  }
  return result;
}

}  // namespace reid
