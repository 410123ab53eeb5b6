#include "reid/core_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <set>
#include <unordered_set>

#include "reid/errors.hpp"

namespace reid {

FeatureSet::FeatureSet(std::vector<std::string> ids, std::size_t dim, std::vector<float> data)
    : ids_(std::move(ids)), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw ValidationError("feature dimension must be >= 1");
  if (data_.size() != ids_.size() * dim_) {
    throw ValidationError("feature data size " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(ids_.size()) + " x " +
                          std::to_string(dim_));
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw ValidationError("duplicate image id '" + ids_[i] + "'");
    }
  }
  for (std::size_t k = 0; k < data_.size(); ++k) {
    if (!std::isfinite(data_[k])) {
      throw ValidationError("non-finite value in feature row '" + ids_[k / dim_] + "'");
    }
  }
}

std::size_t FeatureSet::index_of(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? npos : it->second;
}

bool operator==(const FeatureSet& a, const FeatureSet& b) {
  if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.data_.size() != b.data_.size()) return false;
  // Bitwise comparison: the round-trip contract is bit-identical floats.
  return std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(), [](float x, float y) {
    return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
  });
}

void LabelTable::add(const std::string& id, Label label) {
  if (label.identity < 0 || label.camera < 0) {
    throw ValidationError("negative identity or camera for image '" + id + "'");
  }
  if (!entries_.emplace(id, label).second) {
    throw ValidationError("duplicate image id '" + id + "' in label table");
  }
}

const Label* LabelTable::find(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

const Label& LabelTable::at(const std::string& id) const {
  if (const Label* l = find(id)) return *l;
  throw ValidationError("no label for image '" + id + "'");
}

std::vector<int> LabelTable::identities() const {
  std::set<int> ids;
  for (const auto& [_, l] : entries_) ids.insert(l.identity);
  return {ids.begin(), ids.end()};
}

TrackTable::TrackTable(std::vector<Track> tracks) : tracks_(std::move(tracks)) {
  std::unordered_set<std::string> seen;
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    if (tracks_[t].empty()) throw ValidationError("track " + std::to_string(t) + " is empty");
    for (const auto& id : tracks_[t]) {
      if (!seen.insert(id).second) {
        throw ValidationError("image id '" + id + "' appears in more than one track");
      }
    }
  }
}

DistanceMatrix::DistanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ValidationError("distance matrix value count does not match shape");
  }
}

void DistanceMatrix::validate() const {
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("distance matrix has a negative or non-finite entry");
    }
  }
}

bool DistanceMatrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      if ((*this)(i, j) != (*this)(j, i)) return false;
    }
  }
  return true;
}

void validate_ranks(const RankList& ranks, std::size_t gallery_size) {
  std::vector<char> seen(gallery_size);
  for (std::size_t q = 0; q < ranks.size(); ++q) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t g : ranks[q]) {
      if (g >= gallery_size) {
        throw ValidationError("rank list of query " + std::to_string(q) + " has index " +
                              std::to_string(g) + " outside gallery of size " +
                              std::to_string(gallery_size));
      }
      if (seen[g]) {
        throw ValidationError("rank list of query " + std::to_string(q) +
                              " repeats gallery index " + std::to_string(g));
      }
      seen[g] = 1;
    }
  }
}

}  // namespace reid
