#include "reid/synth.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "reid/errors.hpp"
#include "reid/rng.hpp"

namespace reid {
namespace {

enum Stream : std::uint64_t { kCentroids = 1, kCameraBias = 2, kImageNoise = 3, kViewNoise = 4 };

std::string image_id(std::size_t identity, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "img_%05zu_%04zu", identity, index);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_ids < 1 || per_id < 1 || n_cameras < 1) {
    throw ValidationError("synthetic config needs n_ids, per_id and n_cameras >= 1");
  }
  if (dim < 2) throw ValidationError("synthetic config needs dim >= 2");
  if (!(noise_sigma >= 0.0) || !(camera_bias_sigma >= 0.0)) {
    throw ValidationError("synthetic noise scales must be >= 0");
  }
}

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t dim = cfg.dim;
  const double per_coord_noise = cfg.noise_sigma / std::sqrt(double(dim));
  const double per_coord_bias = cfg.camera_bias_sigma / std::sqrt(double(dim));

  Rng centroid_rng(mix_seed(cfg.seed, kCentroids));
  std::vector<double> centroids(cfg.n_ids * dim);
  for (std::size_t i = 0; i < cfg.n_ids; ++i) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = centroid_rng.normal();
        centroids[i * dim + d] = v;
        sq += v * v;
      }
    } while (sq == 0.0);
    const double norm = std::sqrt(sq);
    for (std::size_t d = 0; d < dim; ++d) centroids[i * dim + d] /= norm;
  }

  Rng bias_rng(mix_seed(cfg.seed, kCameraBias));
  std::vector<double> bias(cfg.n_ids * cfg.n_cameras * dim);
  for (auto& b : bias) b = per_coord_bias * bias_rng.normal();

  Rng noise_rng(mix_seed(cfg.seed, kImageNoise));
  std::vector<std::string> ids;
  std::vector<float> data;
  ids.reserve(cfg.n_ids * cfg.per_id);
  data.reserve(cfg.n_ids * cfg.per_id * dim);
  LabelTable labels;
  std::vector<Track> tracks(cfg.n_ids * cfg.n_cameras);
  for (std::size_t i = 0; i < cfg.n_ids; ++i) {
    for (std::size_t j = 0; j < cfg.per_id; ++j) {
      const std::size_t cam = j % cfg.n_cameras;
      const double* b = &bias[(i * cfg.n_cameras + cam) * dim];
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = centroids[i * dim + d] + b[d] + per_coord_noise * noise_rng.normal();
        data.push_back(static_cast<float>(v));
      }
      ids.push_back(image_id(i, j));
      labels.add(ids.back(), Label{int(i), int(cam)});
      tracks[i * cfg.n_cameras + cam].push_back(ids.back());
    }
  }
  std::erase_if(tracks, [](const Track& t) { return t.empty(); });
  return {FeatureSet(std::move(ids), dim, std::move(data)), std::move(labels),
          TrackTable(std::move(tracks))};
}

std::vector<FeatureSet> generate_multiview(const SynthConfig& cfg, std::size_t n_models,
                                           double model_noise_sigma) {
  if (n_models < 1) throw ValidationError("generate_multiview needs n_models >= 1");
  if (!(model_noise_sigma >= 0.0)) throw ValidationError("model noise scale must be >= 0");
  const SynthDataset base = generate(cfg);
  const double per_coord = model_noise_sigma / std::sqrt(double(cfg.dim));
  std::vector<FeatureSet> views;
  views.reserve(n_models);
  for (std::size_t m = 0; m < n_models; ++m) {
    Rng rng(mix_seed(mix_seed(cfg.seed, kViewNoise), m));
    std::vector<float> data = base.features.data();
    if (model_noise_sigma > 0.0) {
      for (auto& v : data) v = static_cast<float>(double(v) + per_coord * rng.normal());
    }
    views.emplace_back(base.features.ids(), cfg.dim, std::move(data));
  }
  return views;
}

QueryGallerySplit split_query_gallery(const SynthDataset& data, std::size_t queries_per_id,
                                      std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> rows_by_identity;
  const auto& ids = data.features.ids();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    rows_by_identity[data.labels.at(ids[r]).identity].push_back(r);
  }
  Rng rng(seed);
  std::vector<char> is_query(ids.size(), 0);
  for (auto& [identity, rows] : rows_by_identity) {
    if (queries_per_id >= rows.size()) {
      throw ValidationError("identity " + std::to_string(identity) + " has " +
                            std::to_string(rows.size()) + " images; cannot take " +
                            std::to_string(queries_per_id) + " queries and keep a gallery match");
    }
    rng.shuffle(rows.begin(), rows.end());
    for (std::size_t q = 0; q < queries_per_id; ++q) is_query[rows[q]] = 1;
  }
  QueryGallerySplit split;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    (is_query[r] ? split.query_ids : split.gallery_ids).push_back(ids[r]);
  }
  return split;
}

FeatureSet select_rows(const FeatureSet& set, const std::vector<std::string>& ids) {
  std::vector<float> data;
  data.reserve(ids.size() * set.dim());
  for (const auto& id : ids) {
    const std::size_t r = set.index_of(id);
    if (r == FeatureSet::npos) throw ValidationError("unknown image id '" + id + "'");
    auto row = set.row(r);
    data.insert(data.end(), row.begin(), row.end());
  }
  return FeatureSet(ids, set.dim(), std::move(data));
}

TrackTable restrict_tracks(const TrackTable& tracks, const FeatureSet& set) {
  std::vector<Track> out;
  for (const auto& track : tracks.tracks()) {
    Track kept;
    for (const auto& id : track) {
      if (set.contains(id)) kept.push_back(id);
    }
    if (!kept.empty()) out.push_back(std::move(kept));
  }
  return TrackTable(std::move(out));
}

}  // namespace reid
