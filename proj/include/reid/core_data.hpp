#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace reid {

// N x D matrix of f32 embeddings, row i labelled by ids()[i].
//
// Immutable after construction. The constructor enforces the invariants:
// unique ids, D >= 1, finite values, data.size() == N * D.
class FeatureSet {
 public:
  FeatureSet(std::vector<std::string> ids, std::size_t dim, std::vector<float> data);

  // Empty set of the given dimension.
  explicit FeatureSet(std::size_t dim) : FeatureSet({}, dim, {}) {}

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  // Row index of an id, or npos when the id is absent.
  std::size_t index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_of(id) != npos; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  friend bool operator==(const FeatureSet& a, const FeatureSet& b);

 private:
  std::vector<std::string> ids_;
  std::size_t dim_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Label {
  int identity = 0;
  int camera = 0;
  friend bool operator==(const Label&, const Label&) = default;
};

// image-id -> (identity, camera). Iteration is in id order.
class LabelTable {
 public:
  LabelTable() = default;

  // Throws ValidationError on a duplicate id or a negative field.
  void add(const std::string& id, Label label);

  const Label* find(const std::string& id) const;
  // Throws ValidationError when the id is missing.
  const Label& at(const std::string& id) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, Label>& entries() const { return entries_; }

  // Sorted distinct identities.
  std::vector<int> identities() const;

  friend bool operator==(const LabelTable&, const LabelTable&) = default;

 private:
  std::map<std::string, Label> entries_;
};

using Track = std::vector<std::string>;

// Ordered gallery tracks; an id belongs to at most one track.
class TrackTable {
 public:
  TrackTable() = default;
  explicit TrackTable(std::vector<Track> tracks);

  std::size_t size() const { return tracks_.size(); }
  bool empty() const { return tracks_.empty(); }
  const std::vector<Track>& tracks() const { return tracks_; }

  friend bool operator==(const TrackTable&, const TrackTable&) = default;

 private:
  std::vector<Track> tracks_;
};

// Per-query ordered gallery row indices.
using RankList = std::vector<std::vector<std::size_t>>;

// Q x G matrix of finite, non-negative dissimilarities (row-major f64).
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  DistanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  DistanceMatrix(std::size_t rows, std::size_t cols)
      : DistanceMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }

  // Throws ValidationError on a negative or non-finite entry.
  void validate() const;

  bool is_symmetric() const;

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Throws ValidationError unless every index in every list is unique and
// below gallery_size.
void validate_ranks(const RankList& ranks, std::size_t gallery_size);

}  // namespace reid
