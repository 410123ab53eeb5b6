#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "reid/core_data.hpp"

namespace reid {

// Binary feature file:
//   "RRF1" | u32 N | u32 D | N x (u32 byte length, UTF-8 id) | N*D f32, row-major
// All integers and floats little-endian.
void write_features(const FeatureSet& set, const std::filesystem::path& path);
FeatureSet read_features(const std::filesystem::path& path);

// CSV text, one `image_id,identity,camera` record per line. Blank lines are
// skipped; fields are whitespace-trimmed.
LabelTable read_labels(const std::filesystem::path& path);
void write_labels(const LabelTable& labels, const std::filesystem::path& path);

// Line k holds the whitespace-separated image ids of track k. Blank lines are
// skipped.
TrackTable read_tracks(const std::filesystem::path& path);
void write_tracks(const TrackTable& tracks, const std::filesystem::path& path);

// One line per query: the first min(top_k, list length) gallery ids,
// space-separated.
void write_submission(const RankList& ranks, const std::vector<std::string>& gallery_ids,
                      std::size_t top_k, const std::filesystem::path& path);

// Inverse of write_submission: maps each listed gallery id back to its row.
RankList read_submission(const std::filesystem::path& path,
                         const std::vector<std::string>& gallery_ids);

// Binary distance file: "RRD1" | u32 Q | u32 G | Q*G f64, row-major, little-endian.
void write_distances(const DistanceMatrix& dist, const std::filesystem::path& path);
DistanceMatrix read_distances(const std::filesystem::path& path);

}  // namespace reid
