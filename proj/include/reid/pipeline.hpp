#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reid/core_data.hpp"
#include "reid/ensemble.hpp"
#include "reid/metrics.hpp"
#include "reid/pseudo_label.hpp"
#include "reid/rerank.hpp"

namespace reid {

// Every tunable of the testing-stage pipeline. Parsed from an INI-style file:
//
//   # comment
//   [rerank]
//   enabled = true
//   k1 = 20
//
// Sections: metric, ensemble, track_merge, query_expansion, rerank, kmeans,
// eval, submit. Unknown sections or keys are rejected; values are
// type-checked. Missing keys keep the defaults below.
struct PipelineConfig {
  Metric metric = Metric::euclidean;
  EnsembleStrategy ensemble = EnsembleStrategy::concat_features;

  bool track_merge_enabled = true;
  TrackMergeConfig track_merge;

  bool query_expansion_enabled = true;
  QueryExpansionConfig query_expansion;

  bool rerank_enabled = true;
  RerankConfig rerank;

  KMeansConfig kmeans;
  int identity_offset = 0;
  std::size_t min_cluster_size = 1;

  EvalOptions eval;
  std::size_t submit_top_k = 100;

  // Applies one `section.key = value` assignment.
  void set(std::string_view section, std::string_view key, std::string_view value);
  // Applies "section.key=value".
  void set(std::string_view assignment);

  void validate() const;

  static PipelineConfig parse(std::string_view text, std::string_view source = "<config>");
  static PipelineConfig load(const std::filesystem::path& path);

  // Canonical text form; parse(to_string()) reproduces the config.
  std::string to_string() const;
};

struct PipelineInputs {
  // One feature set per model, queries and gallery listed in the same order.
  std::vector<FeatureSet> query_views;
  std::vector<FeatureSet> gallery_views;
  std::optional<TrackTable> tracks;
  std::optional<LabelTable> labels;
};

struct PipelineResult {
  DistanceMatrix distances;  // final query x gallery distances
  RankList ranks;
  std::vector<std::string> query_ids;
  std::vector<std::string> gallery_ids;
  std::optional<EvalResult> eval;
};

// load -> ensemble fusion -> track merge -> query expansion -> distance ->
// k-reciprocal re-rank -> rank -> eval. Disabled stages pass their input
// through. With the average_distance strategy the per-model features go
// through merge/expansion/distance separately and the matrices are averaged
// before re-ranking. Errors are rethrown with the failing stage named.
PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineInputs& inputs);

// Writes ranks.txt (submission format), distances.rrd, and, when the result
// carries an evaluation, eval.csv and eval.txt into out_dir.
void write_pipeline_outputs(const PipelineResult& result, const PipelineConfig& cfg,
                            const std::filesystem::path& out_dir);

// `name,value` CSV: mAP, evaluated_queries, then cmc@1 .. cmc@max_rank.
std::string eval_csv(const EvalResult& result);
// Short human-readable table.
std::string eval_table(const EvalResult& result);

}  // namespace reid
