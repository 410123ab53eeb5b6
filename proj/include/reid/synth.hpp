#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "reid/core_data.hpp"

namespace reid {

// Noise scales are total-norm scales: a noise vector has i.i.d. coordinates
// with standard deviation sigma / sqrt(dim), so its expected squared norm is
// sigma^2, comparable to the unit-norm identity centroids.
struct SynthConfig {
  std::size_t n_ids = 50;
  std::size_t per_id = 10;
  std::size_t dim = 32;
  double noise_sigma = 0.1;
  std::size_t n_cameras = 4;
  double camera_bias_sigma = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  FeatureSet features;
  LabelTable labels;
  TrackTable tracks;  // one track per (identity, camera) group
};

// Image j of identity i gets id "img_<i>_<j>" (zero-padded), camera
// j mod n_cameras, and feature centroid_i + bias_(i, camera) + noise_ij.
SynthDataset generate(const SynthConfig& cfg);

// The base dataset's features plus independent noise of scale
// model_noise_sigma per view. All views share ids and row order.
std::vector<FeatureSet> generate_multiview(const SynthConfig& cfg, std::size_t n_models,
                                           double model_noise_sigma);

struct QueryGallerySplit {
  std::vector<std::string> query_ids;
  std::vector<std::string> gallery_ids;
};

// Picks queries_per_id images of every identity (seeded) as queries; the rest
// form the gallery, both in dataset row order.
QueryGallerySplit split_query_gallery(const SynthDataset& data, std::size_t queries_per_id,
                                      std::uint64_t seed);

// Rows of `set` for the listed ids, in list order.
FeatureSet select_rows(const FeatureSet& set, const std::vector<std::string>& ids);

// Tracks restricted to the ids present in `set`; emptied tracks are dropped.
TrackTable restrict_tracks(const TrackTable& tracks, const FeatureSet& set);

}  // namespace reid
