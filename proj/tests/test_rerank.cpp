#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "reid/errors.hpp"
#include "reid/rerank.hpp"

using namespace reid;

TEST_CASE("rerank config validation") {
  CHECK_THROWS_AS((RerankConfig{0, 1, 0.3}).validate(), ValidationError);
  CHECK_THROWS_AS((RerankConfig{3, 4, 0.3}).validate(), ValidationError);
  CHECK_THROWS_AS((RerankConfig{3, 2, 1.5}).validate(), ValidationError);
  CHECK_NOTHROW((RerankConfig{3, 3, 1.0}).validate());
}

TEST_CASE("rerank input validation") {
  Rng rng(1);
  auto u = oracle::random_union(3, 5, 4, rng);
  CHECK_THROWS_AS(k_reciprocal_rerank(u.qg, u.qq, u.gg, {8, 2, 0.3}), ValidationError);
  CHECK_NOTHROW(k_reciprocal_rerank(u.qg, u.qq, u.gg, {7, 2, 0.3}));

  auto asym = u.gg;
  asym(0, 1) += 0.5;
  CHECK_THROWS_AS(k_reciprocal_rerank(u.qg, u.qq, asym, {3, 2, 0.3}), ValidationError);
  auto diag = u.qq;
  diag(1, 1) = 0.1;
  CHECK_THROWS_AS(k_reciprocal_rerank(u.qg, diag, u.gg, {3, 2, 0.3}), ValidationError);
  CHECK_THROWS_AS(k_reciprocal_rerank(DistanceMatrix(3, 4), u.qq, u.gg, {3, 2, 0.3}), ValidationError);
}

TEST_CASE("rerank matches the naive set-operation oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nq = 1 + rng.below(8), ng = 2 + rng.below(29);
    const std::size_t n = nq + ng;
    auto u = oracle::random_union(nq, ng, 2 + rng.below(6), rng);
    RerankConfig cfg;
    cfg.k1 = 1 + rng.below(std::min<std::size_t>(n - 1, 20));
    cfg.k2 = 1 + rng.below(cfg.k1);
    cfg.lambda = rng.uniform();
    const auto got = k_reciprocal_rerank(u.qg, u.qq, u.gg, cfg);
    const auto want = oracle::rerank(oracle::to_grid(u.qg), oracle::to_grid(u.qq),
                                     oracle::to_grid(u.gg), cfg.k1, cfg.k2, cfg.lambda);
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t g = 0; g < ng; ++g) CHECK(std::abs(got(q, g) - want[q][g]) < 1e-9);
    }
  }
}

TEST_CASE("rerank with lambda = 1 preserves the original ranking") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto u = oracle::random_union(1 + rng.below(8), 5 + rng.below(26), 3, rng);
    const auto out = k_reciprocal_rerank(u.qg, u.qq, u.gg, {4, 2, 1.0});
    CHECK(rank(out) == rank(u.qg));
    CHECK(out == u.qg);
  }
}

TEST_CASE("rerank output is finite and the Jaccard part lies in [0, 1]") {
  Rng rng(4);
  auto u = oracle::random_union(6, 25, 4, rng);
  const auto out = k_reciprocal_rerank(u.qg, u.qq, u.gg, {10, 4, 0.0});
  for (double v : out.values()) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("rerank favours the match that shares reciprocal neighbours") {
  // On a line: the query's group is {q, a, b, g0}; the distractor g1 is
  // closer to q but belongs to the group {g1, c1, c2}.
  const FeatureSet q({"q"}, 1, {0.f});
  const FeatureSet g({"g0", "g1", "a", "b", "c1", "c2"}, 1, {0.3f, -0.25f, 0.15f, 0.25f, -0.5f, -0.55f});
  const auto raw = distance_matrix(q, g, Metric::euclidean);
  CHECK(raw(0, 1) < raw(0, 0));
  const RerankConfig cfg{3, 1, 0.0};
  const auto out = k_reciprocal_rerank(q, g, Metric::euclidean, cfg);
  CHECK(out(0, 0) < out(0, 1));
  const auto want = oracle::rerank(oracle::to_grid(raw),
                                   oracle::to_grid(distance_matrix(q, q, Metric::euclidean)),
                                   oracle::to_grid(distance_matrix(g, g, Metric::euclidean)), 3, 1, 0.0);
  CHECK(std::abs(out(0, 0) - want[0][0]) < 1e-12);
  CHECK(std::abs(out(0, 1) - want[0][1]) < 1e-12);
}

TEST_CASE("query expansion") {
  const FeatureSet q({"q"}, 2, {0.f, 0.f});
  const FeatureSet g({"a", "b"}, 2, {1.f, 0.f, 10.f, 10.f});
  const auto one = query_expansion(q, g, Metric::euclidean, {1, 1});
  CHECK(one.row(0)[0] == 0.5f);
  CHECK(one.row(0)[1] == 0.f);

  const FeatureSet same({"a", "b"}, 2, {0.f, 0.f, 0.f, 0.f});
  CHECK(query_expansion(q, same, Metric::euclidean, {2, 3}) == q);

  Rng rng(6);
  const auto qs = oracle::random_features(4, 5, rng, "q");
  const auto gs = oracle::random_features(20, 5, rng, "g");
  const auto twice = query_expansion(query_expansion(qs, gs, Metric::cosine, {3, 1}), gs,
                                     Metric::cosine, {3, 1});
  CHECK(query_expansion(qs, gs, Metric::cosine, {3, 2}) == twice);

  CHECK_THROWS_AS(query_expansion(q, g, Metric::euclidean, {3, 1}), ValidationError);
  CHECK_THROWS_AS(query_expansion(q, g, Metric::euclidean, {1, 0}), ValidationError);
}

TEST_CASE("track merge") {
  const FeatureSet g({"a", "b", "c", "d"}, 2, {0.f, 0.f, 2.f, 0.f, 5.f, 5.f, 7.f, 7.f});
  const auto merged = gallery_track_merge(g, TrackTable(std::vector<Track>{{"a", "b"}}));
  CHECK(merged.row(0)[0] == 1.f);
  CHECK(merged.row(1)[0] == 1.f);
  CHECK(merged.row(2)[0] == 5.f);

  CHECK(gallery_track_merge(g, TrackTable(std::vector<Track>{{"a", "b", "c"}}), {1}) == g);

  const auto limited = gallery_track_merge(g, TrackTable(std::vector<Track>{{"c", "d", "a"}}), {2});
  CHECK(limited.row(2)[0] == 6.f);
  CHECK(limited.row(3)[0] == 6.f);
  CHECK(limited.row(0)[0] == 0.f);

  const FeatureSet equal({"a", "b", "c"}, 1, {3.f, 3.f, 3.f});
  CHECK(gallery_track_merge(equal, TrackTable(std::vector<Track>{{"a", "b", "c"}})) == equal);

  CHECK_THROWS_AS(gallery_track_merge(g, TrackTable(std::vector<Track>{{"zz"}})), ValidationError);
  CHECK_THROWS_AS(gallery_track_merge(g, TrackTable(std::vector<Track>{{"a"}}), {0}), ValidationError);

  Rng rng(12);
  const auto big = oracle::random_features(30, 4, rng);
  const TrackTable tracks(std::vector<Track>{{"x0", "x3", "x7"}, {"x1", "x2"}, {"x10", "x11", "x12", "x13"}});
  for (std::optional<std::size_t> t : {std::optional<std::size_t>{}, std::optional<std::size_t>{2}}) {
    const auto once = gallery_track_merge(big, tracks, {t});
    const auto twice = gallery_track_merge(once, tracks, {t});
    for (std::size_t i = 0; i < once.data().size(); ++i) {
      CHECK(std::abs(once.data()[i] - twice.data()[i]) < 1e-6);
    }
  }
}
