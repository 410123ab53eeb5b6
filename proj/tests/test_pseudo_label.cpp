#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "reid/errors.hpp"
#include "reid/pseudo_label.hpp"

using namespace reid;

namespace {

FeatureSet blobs(std::size_t per_blob, double separation, double spread, Rng& rng) {
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      ids.push_back("b" + std::to_string(b) + "_" + std::to_string(i));
      data.push_back(static_cast<float>(double(b) * separation + spread * rng.normal()));
      data.push_back(static_cast<float>(spread * rng.normal()));
    }
  }
  return FeatureSet(ids, 2, data);
}

double sq_to_center(const FeatureSet& f, const ClusterResult& r, std::size_t i, std::size_t c) {
  double acc = 0.0;
  for (std::size_t d = 0; d < r.dim; ++d) {
    const double diff = f.row(i)[d] - r.centers[c * r.dim + d];
    acc += diff * diff;
  }
  return acc;
}

LabelTable table(int first_identity, std::size_t n_ids, const std::string& prefix) {
  LabelTable t;
  for (std::size_t i = 0; i < n_ids; ++i) t.add(prefix + std::to_string(i), {first_identity + int(i), 0});
  return t;
}

}  // namespace

TEST_CASE("k-means validation") {
  Rng rng(1);
  const auto f = oracle::random_features(5, 2, rng);
  CHECK_THROWS_AS(kmeans(f, {6, 10, 1e-6, 0}), ValidationError);
  CHECK_THROWS_AS(kmeans(f, {0, 10, 1e-6, 0}), ValidationError);
  CHECK_THROWS_AS(kmeans(f, {2, 0, 1e-6, 0}), ValidationError);
}

TEST_CASE("k = N gives zero inertia") {
  Rng rng(2);
  const auto f = oracle::random_features(12, 3, rng);
  const auto r = kmeans(f, {12, 50, 1e-6, 4});
  CHECK(r.inertia == 0.0);
  const std::set<std::size_t> distinct(r.assignments.begin(), r.assignments.end());
  CHECK(distinct.size() == 12);
}

TEST_CASE("two separated blobs are recovered exactly") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 100);
    const auto f = blobs(25, 50.0, 0.5, rng);
    const auto r = kmeans(f, {2, 100, 1e-9, seed});
    for (std::size_t i = 0; i < 50; ++i) CHECK((r.assignments[i] == r.assignments[0]) == (i < 25));
  }
}

TEST_CASE("k-means inertia never increases and assignments are nearest centers") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Rng rng(seed);
    const auto f = oracle::random_features(80, 3, rng);
    const auto r = kmeans(f, {7, 300, 0.0, seed});
    REQUIRE(!r.inertia_history.empty());
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
      CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] * (1 + 1e-12));
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double own = sq_to_center(f, r, i, r.assignments[i]);
      inertia += own;
      for (std::size_t c = 0; c < r.k; ++c) CHECK(own <= sq_to_center(f, r, i, c) + 1e-9);
    }
    CHECK(std::abs(inertia - r.inertia) < 1e-6 * (1 + inertia));
    // Converged centers are member means.
    for (std::size_t c = 0; c < r.k; ++c) {
      std::vector<double> mean(r.dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (r.assignments[i] != c) continue;
        ++count;
        for (std::size_t d = 0; d < r.dim; ++d) mean[d] += f.row(i)[d];
      }
      if (count == 0) continue;
      for (std::size_t d = 0; d < r.dim; ++d) CHECK(std::abs(mean[d] / double(count) - r.centers[c * r.dim + d]) < 1e-9);
    }
  }
}

TEST_CASE("k-means is deterministic") {
  Rng rng(3);
  const auto f = oracle::random_features(60, 4, rng);
  const auto a = kmeans(f, {5, 100, 1e-6, 42});
  const auto b = kmeans(f, {5, 100, 1e-6, 42});
  CHECK(a.assignments == b.assignments);
  CHECK(a.inertia == b.inertia);
  CHECK(a.centers == b.centers);
}

TEST_CASE("k-means handles duplicate points") {
  const FeatureSet f({"a", "b", "c", "d"}, 1, {1.f, 1.f, 1.f, 5.f});
  const auto r = kmeans(f, {3, 20, 1e-6, 0});
  CHECK(r.inertia == 0.0);
  CHECK(r.assignments.size() == 4);
}

TEST_CASE("fake labels") {
  ClusterResult r;
  r.k = 3;
  r.dim = 1;
  r.assignments = {2, 0, 1, 2};
  r.centers = {0, 0, 0};
  const auto t = assign_fake_labels(r, {"a", "b", "c", "d"}, 1645);
  CHECK(t.identities() == std::vector<int>{1645, 1646, 1647});
  CHECK(t.at("b") == Label{1645, 0});
  CHECK(t.at("a") == Label{1647, 0});

  const auto filtered = assign_fake_labels(r, {"a", "b", "c", "d"}, 0, 2);
  CHECK(filtered.size() == 2);
  CHECK(filtered.find("b") == nullptr);
  CHECK(filtered.at("a").identity == 0);

  CHECK_THROWS_AS(assign_fake_labels(r, {"a"}, 0), ValidationError);
  CHECK_THROWS_AS(assign_fake_labels(r, {"a", "b", "c", "d"}, -1), ValidationError);
}

TEST_CASE("333 clusters with three empty ones give 330 identities") {
  ClusterResult r;
  r.k = 333;
  r.dim = 1;
  r.centers.assign(333, 0.0);
  for (std::size_t i = 0; i < 990; ++i) r.assignments.push_back(i % 330);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 990; ++i) ids.push_back("t" + std::to_string(i));
  CHECK(assign_fake_labels(r, ids, 1645).identities().size() == 330);
}

TEST_CASE("merging label tables") {
  const auto train = table(0, 1645, "train_");
  const auto fake = table(1645, 330, "test_");
  const auto merged = merge_datasets(train, fake);
  CHECK(merged.identities().size() == 1975);
  CHECK(merge_datasets(train, LabelTable{}) == train);
  CHECK_THROWS_AS(merge_datasets(train, table(1600, 10, "x_")), ValidationError);
  CHECK_THROWS_AS(merge_datasets(table(0, 2, "a"), table(5, 2, "a")), ValidationError);
}

TEST_CASE("self-val split") {
  LabelTable all;
  Rng rng(4);
  for (int i = 0; i < 300; ++i) all.add("img" + std::to_string(i), {int(rng.below(60)), int(rng.below(3))});
  const auto ids = all.identities();

  const auto s = selfval_split(all, 50, 9);
  const auto tr = s.train.identities(), va = s.val.identities();
  CHECK(va.size() == 50);
  std::set<int> both(tr.begin(), tr.end());
  for (int v : va) CHECK(both.insert(v).second);
  CHECK(both.size() == ids.size());
  CHECK(s.train.size() + s.val.size() == all.size());
  for (const auto& [id, label] : s.val.entries()) CHECK(all.at(id) == label);

  CHECK(selfval_split(all, 0, 1).val.empty());
  CHECK(selfval_split(all, ids.size(), 1).train.empty());
  CHECK_THROWS_AS(selfval_split(all, ids.size() + 1, 1), ValidationError);
  CHECK(selfval_split(all, 50, 9).val == s.val);
}

TEST_CASE("fake labels from noiseless clusters do not hurt a centroid classifier") {
  // Class features are centroids of labelled images; adding correctly
  // clustered unlabelled images cannot move them in the noiseless case.
  const std::size_t n_ids = 6;
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t i = 0; i < n_ids; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      ids.push_back("u" + std::to_string(i) + "_" + std::to_string(j));
      data.push_back(float(10 * i));
      data.push_back(float(i % 2));
    }
  }
  const FeatureSet unlabelled(ids, 2, data);
  const auto r = kmeans(unlabelled, {n_ids, 50, 1e-9, 3});
  const auto fake = assign_fake_labels(r, unlabelled.ids(), 100);
  CHECK(fake.identities().size() == n_ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(fake.at(ids[i]).identity == fake.at(ids[i - i % 4]).identity);
  }
}
