#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "reid/core_data.hpp"

namespace reid {

enum class Metric { euclidean, cosine };

Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric m);

// Entry (i, j) is the metric between queries.row(i) and gallery.row(j),
// accumulated in f64. Euclidean is the plain (non-squared) L2 distance;
// cosine is 1 - a.b / (|a||b|), clamped at 0 against rounding.
DistanceMatrix distance_matrix(const FeatureSet& queries, const FeatureSet& gallery,
                               Metric metric);

// Ascending distance per row; ties broken by ascending gallery index.
RankList rank(const DistanceMatrix& dist);

struct EvalOptions {
  std::size_t max_rank = 50;
  // Drop gallery items with the query's identity *and* camera.
  bool cross_camera = false;
  // Truncate each ranking to this length before computing AP.
  std::optional<std::size_t> top_k_map;
};

struct EvalResult {
  double map = 0.0;
  // cmc[r]: fraction of evaluated queries with a match in the first r + 1.
  std::vector<double> cmc;
  // nullopt marks a query with no relevant gallery item; those are excluded
  // from both mAP and CMC.
  std::vector<std::optional<double>> per_query_ap;
  std::size_t evaluated_queries = 0;
};

// Relevance is "same identity". For a query with R relevant gallery items
// in the (optionally camera-filtered) gallery, AP is the sum of precision@i
// over the ranks i holding a relevant item, divided by R. With top_k_map = K
// the ranking is cut to K entries and the divisor becomes min(R, K).
EvalResult evaluate(const RankList& ranks, const std::vector<std::string>& query_ids,
                    const std::vector<std::string>& gallery_ids, const LabelTable& query_labels,
                    const LabelTable& gallery_labels, const EvalOptions& options = {});

}  // namespace reid
