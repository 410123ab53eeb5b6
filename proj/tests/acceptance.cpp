// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "oracles.hpp"
#include "reid/grafting.hpp"
#include "reid/losses.hpp"
#include "reid/metrics.hpp"
#include "reid/pipeline.hpp"
#include "reid/pseudo_label.hpp"
#include "reid/rerank.hpp"
#include "reid/synth.hpp"
#include "reid/toy_net.hpp"
#include "reid/trainer.hpp"

namespace fs = std::filesystem;
using namespace reid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool pass = out.pass;
  if (limit_s > 0 && secs > limit_s) {
    pass = false;
    out.detail += " (over time limit)";
  }
  if (!pass) ++failures;
  char timing[64];
  if (limit_s > 0) std::snprintf(timing, sizeof timing, "%.2f s, limit %.0f s", secs, limit_s);
  else std::snprintf(timing, sizeof timing, "%.2f s", secs);
  std::printf("[%s] %2d %s: %s [%s]\n", pass ? "PASS" : "FAIL", id, title, out.detail.c_str(), timing);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared synthetic fixture for the retrieval direction checks.
SynthConfig retrieval_fixture(std::uint64_t seed) {
  SynthConfig c;
  c.n_ids = 50;
  c.per_id = 10;
  c.dim = 32;
  c.n_cameras = 4;
  c.noise_sigma = 0.5;
  c.camera_bias_sigma = 0.8;
  c.seed = seed;
  return c;
}

struct QG {
  FeatureSet q, g;
};

QG split_views(const FeatureSet& f, const QueryGallerySplit& s) {
  return {select_rows(f, s.query_ids), select_rows(f, s.gallery_ids)};
}

double map_of(const DistanceMatrix& d, const QG& v, const LabelTable& labels) {
  return evaluate(rank(d), v.q.ids(), v.g.ids(), labels, labels).map;
}

double map_of(const QG& v, const LabelTable& labels) {
  return map_of(distance_matrix(v.q, v.g, Metric::euclidean), v, labels);
}

std::vector<int> pk_labels(std::size_t p, std::size_t k) {
  std::vector<int> out;
  for (std::size_t i = 0; i < p; ++i) out.insert(out.end(), k, int(i));
  return out;
}

std::vector<double> flat_params(const ToyNet& net) {
  std::vector<double> out;
  for (auto s : trainable_parameters(net)) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

int main() {
  criterion(1, "evaluate() equals brute-force AP/CMC oracle", 10, [] {
    Rng rng(1);
    double worst = 0.0;
    int agree = 0;
    for (int t = 0; t < 50; ++t) {
      const std::size_t nq = 1 + rng.below(20), ng = 1 + rng.below(200), nid = 1 + rng.below(25);
      std::vector<std::string> qids, gids;
      std::vector<Label> ql(nq), gl(ng);
      LabelTable table;
      for (std::size_t i = 0; i < nq; ++i) {
        qids.push_back("q" + std::to_string(i));
        ql[i] = {int(rng.below(nid)), int(rng.below(4))};
        table.add(qids.back(), ql[i]);
      }
      for (std::size_t i = 0; i < ng; ++i) {
        gids.push_back("g" + std::to_string(i));
        gl[i] = {int(rng.below(nid)), int(rng.below(4))};
        table.add(gids.back(), gl[i]);
      }
      std::vector<double> v(nq * ng);
      for (auto& x : v) x = double(rng.below(1000));
      const RankList ranks = rank(DistanceMatrix(nq, ng, v));
      EvalOptions opt;
      opt.max_rank = 1 + rng.below(50);
      opt.cross_camera = rng.below(2) == 1;
      if (rng.below(3) == 0) opt.top_k_map = 1 + rng.below(100);
      const auto got = evaluate(ranks, qids, gids, table, table, opt);
      const auto want = oracle::evaluate(ranks, ql, gl, opt.max_rank, opt.cross_camera, opt.top_k_map);
      double err = std::abs(got.map - want.map);
      for (std::size_t r = 0; r < got.cmc.size(); ++r) err = std::max(err, std::abs(got.cmc[r] - want.cmc[r]));
      worst = std::max(worst, err);
      agree += err <= 1e-9 && got.evaluated_queries == want.evaluated;
    }
    return Outcome{agree == 50, fmt("%d/50 instances agree, max error %.2e (tol 1e-9)", agree, worst)};
  });

  criterion(2, "k-reciprocal re-ranking equals naive set-operation oracle", 30, [] {
    Rng rng(2);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t nq = 1 + rng.below(8), ng = 2 + rng.below(29);
      const auto u = oracle::random_union(nq, ng, 2 + rng.below(8), rng);
      RerankConfig cfg;
      cfg.k1 = 1 + rng.below(std::min<std::size_t>(nq + ng - 1, 20));
      cfg.k2 = 1 + rng.below(std::min<std::size_t>(cfg.k1, 6));
      cfg.lambda = rng.uniform();
      const auto got = k_reciprocal_rerank(u.qg, u.qq, u.gg, cfg);
      const auto want = oracle::rerank(oracle::to_grid(u.qg), oracle::to_grid(u.qq), oracle::to_grid(u.gg),
                                       cfg.k1, cfg.k2, cfg.lambda);
      for (std::size_t q = 0; q < nq; ++q) {
        for (std::size_t g = 0; g < ng; ++g) worst = std::max(worst, std::abs(got(q, g) - want[q][g]));
      }
    }
    return Outcome{worst <= 1e-9, fmt("20 instances, max error %.2e (tol 1e-9)", worst)};
  });

  criterion(3, "re-ranking with lambda=1 keeps the original ranking", 0, [] {
    Rng rng(3);
    int same = 0;
    const int total = 40;
    for (int t = 0; t < total; ++t) {
      const std::size_t nq = 1 + rng.below(8), ng = 2 + rng.below(29);
      const auto u = oracle::random_union(nq, ng, 2 + rng.below(8), rng);
      RerankConfig cfg;
      cfg.k1 = 1 + rng.below(std::min<std::size_t>(nq + ng - 1, 20));
      cfg.k2 = 1 + rng.below(cfg.k1);
      cfg.lambda = 1.0;
      same += rank(k_reciprocal_rerank(u.qg, u.qq, u.gg, cfg)) == rank(u.qg);
    }
    return Outcome{same == total, fmt("%d/%d instances with identical rankings", same, total)};
  });

  criterion(4, "re-ranking / query expansion / track merge direction on synthetic data", 120, [] {
    int rerank_wins = 0, qe_wins = 0, merge_ok = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto data = generate(retrieval_fixture(s));
      const auto split = split_query_gallery(data, 1, s + 1000);
      const QG v = split_views(data.features, split);
      const double base = map_of(v, data.labels);
      rerank_wins += map_of(k_reciprocal_rerank(v.q, v.g, Metric::euclidean), v, data.labels) > base;
      const QG expanded{query_expansion(v.q, v.g, Metric::euclidean), v.g};
      qe_wins += map_of(expanded, data.labels) > base;

      // Track merge with either the camera bias or the per-image noise switched off.
      bool ok = true;
      for (int variant = 0; variant < 2; ++variant) {
        SynthConfig flat = retrieval_fixture(s);
        (variant == 0 ? flat.camera_bias_sigma : flat.noise_sigma) = 0.0;
        const auto fdata = generate(flat);
        const QG fv = split_views(fdata.features, split);
        const QG merged{fv.q, gallery_track_merge(fv.g, restrict_tracks(fdata.tracks, fv.g))};
        ok = ok && map_of(merged, fdata.labels) >= map_of(fv, fdata.labels);
      }
      merge_ok += ok;
    }
    const bool pass = rerank_wins >= 18 && qe_wins >= 14 && merge_ok == 20;
    return Outcome{pass, fmt("re-rank improves %d/20 (need 18), QE improves %d/20 (need 14), "
                             "track merge non-decreasing %d/20 (need 20)",
                             rerank_wins, qe_wins, merge_ok)};
  });

  criterion(5, "concatenated ensemble vs single views and feature averaging", 120, [] {
    int beats_views = 0, beats_avg = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const SynthConfig cfg = retrieval_fixture(s);
      const auto labels = generate(cfg).labels;
      const auto views = generate_multiview(cfg, 3, 0.3);
      const auto split = split_query_gallery(generate(cfg), 1, s + 1000);
      double best_view = 0.0;
      std::vector<FeatureSet> qs, gs;
      for (const auto& f : views) {
        const QG v = split_views(f, split);
        best_view = std::max(best_view, map_of(v, labels));
        qs.push_back(v.q);
        gs.push_back(v.g);
      }
      const double concat = map_of(QG{concat_features(qs), concat_features(gs)}, labels);
      const double avg = map_of(QG{average_features(qs), average_features(gs)}, labels);
      beats_views += concat >= best_view;
      beats_avg += concat >= avg;
    }
    return Outcome{beats_views >= 18 && beats_avg >= 12,
                   fmt("concat >= every view %d/20 (need 18), concat >= feature average %d/20 (need 12)",
                       beats_views, beats_avg)};
  });

  criterion(6, "analytic gradients match central differences", 30, [] {
    Rng rng(6);
    double worst[4] = {0, 0, 0, 0};
    for (int t = 0; t < 20; ++t) {
      const auto labels = pk_labels(4, 4);
      const Matrix f = oracle::random_matrix(16, 8, rng);
      const auto tl = batch_hard_triplet_loss(f, labels, 0.3);
      worst[0] = std::max(worst[0], oracle::relative_error(tl.grad.data, oracle::numeric_gradient(f.data, [&](const auto& x) {
        return batch_hard_triplet_loss(Matrix(16, 8, x), labels, 0.3).loss;
      })));

      const Matrix logits = oracle::random_matrix(6, 10, rng, 2.0);
      std::vector<int> y(6);
      for (auto& c : y) c = int(rng.below(10));
      const auto ce = cross_entropy_loss(logits, y);
      worst[1] = std::max(worst[1], oracle::relative_error(ce.grad.data, oracle::numeric_gradient(logits.data, [&](const auto& x) {
        return cross_entropy_loss(Matrix(6, 10, x), y).loss;
      })));

      const LossConfig lc{0.3, 1.0};
      const Matrix lg = oracle::random_matrix(16, 5, rng);
      const auto cl = combined_loss(f, lg, labels, lc);
      worst[2] = std::max({worst[2],
                           oracle::relative_error(cl.grad_features.data, oracle::numeric_gradient(f.data, [&](const auto& x) {
                             return combined_loss(Matrix(16, 8, x), lg, labels, lc).total;
                           })),
                           oracle::relative_error(cl.grad_logits.data, oracle::numeric_gradient(lg.data, [&](const auto& x) {
                             return combined_loss(f, Matrix(16, 5, x), labels, lc).total;
                           }))});

      const ToyNet net = make_toy_net({5, {6}, 4, 3, true}, 600 + t);
      const Matrix x = oracle::random_matrix(6, 5, rng);
      const auto nl = pk_labels(3, 2);
      const auto res = net_loss_and_gradients(net, x, nl, lc);
      const auto num = oracle::numeric_gradient(flat_params(net), [&](const std::vector<double>& p) {
        ToyNet copy = net;
        std::size_t at = 0;
        for (auto s : trainable_parameters(copy)) {
          for (auto& v : s) v = p[at++];
        }
        return net_loss_and_gradients(copy, x, nl, lc).loss.total;
      });
      worst[3] = std::max(worst[3], oracle::relative_error(flat_params(res.grads), num));
    }
    const bool pass = worst[0] < 1e-4 && worst[1] < 1e-4 && worst[2] < 1e-4 && worst[3] < 1e-4;
    return Outcome{pass, fmt("max rel. error triplet %.1e, cross-entropy %.1e, combined %.1e, network %.1e (tol 1e-4)",
                             worst[0], worst[1], worst[2], worst[3])};
  });

  criterion(7, "batch-hard mining equals full triple enumeration", 0, [] {
    Rng rng(7);
    int agree = 0;
    for (int t = 0; t < 50; ++t) {
      const std::size_t p = 2 + rng.below(4), k = 2 + rng.below(3);
      const auto labels = pk_labels(p, k);
      Matrix f = oracle::random_matrix(p * k, 1 + rng.below(8), rng);
      if (t % 4 == 0) {
        for (auto& v : f.data) v = double(rng.below(3));
      }
      const auto got = batch_hard_triplet_loss(f, labels, 0.3);
      const auto want = oracle::triplet(f, labels, 0.3);
      agree += got.hardest_positive == want.pos && got.hardest_negative == want.neg;
    }
    return Outcome{agree == 50, fmt("%d/50 batches agree", agree)};
  });

  criterion(8, "grafting invariants", 0, [] {
    const GraftConfig cfg;
    Rng rng(8);
    bool half = true, bounded = true, identity = true, sums = true;
    for (int t = 0; t < 200; ++t) {
      const double h = rng.uniform(0, 5);
      half = half && graft_alpha(h, h, cfg) == 0.5;
      const double h1 = rng.uniform(-10, 10), h2 = rng.uniform(-10, 10);
      const double a1 = graft_alpha(h1, h2, cfg), a2 = graft_alpha(h2, h1, cfg);
      bounded = bounded && a1 >= cfg.clamp && a1 <= 1 - cfg.clamp;
      const double raw = cfg.a_coef * std::atan(cfg.c_coef * (h1 - h2)) + 0.5;
      if (raw > cfg.clamp && raw < 1 - cfg.clamp) sums = sums && std::abs(a1 + a2 - 1.0) <= 1e-12;
    }
    for (int t = 0; t < 10; ++t) {
      const ToyNet net = make_toy_net({6, {8, 5}, 4, 3, t % 2 == 0}, 800 + t);
      const auto r = graft_step(net, net, cfg);
      identity = identity && r.m1 == net && r.m2 == net;
    }
    return Outcome{half && bounded && identity && sums,
                   fmt("alpha=0.5 at equal entropy: %s; alpha in clamp range: %s; identical-net step is identity: %s; "
                       "alpha1+alpha2=1 unclamped: %s",
                       half ? "yes" : "no", bounded ? "yes" : "no", identity ? "yes" : "no", sums ? "yes" : "no")};
  });

  criterion(9, "grafted net1 final loss vs ungrafted baseline", 120, [] {
    int wins = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      SynthConfig sc;
      sc.n_ids = 8;
      sc.per_id = 16;
      sc.dim = 16;
      sc.noise_sigma = 0.5;
      sc.camera_bias_sigma = 0.3;
      sc.n_cameras = 2;
      sc.seed = 500 + s;
      const auto d = generate(sc);
      const TrainingSet data(d.features, d.labels);
      const ToyNetShape shape{16, {32}, 16, 8, true};
      const ToyNet n1 = make_toy_net(shape, 2 * s + 1), n2 = make_toy_net(shape, 2 * s + 2);
      TrainConfig tc;
      tc.schedule.base_lr = 0.03;
      tc.schedule.decay_epochs = {};
      tc.batch = {4, 4};
      const auto grafted = parallel_train_with_grafting(n1, n2, data, tc, {}, 20, 77 + s, 99 + s);
      const auto baseline = train(n1, data, tc, 20, 77 + s);
      wins += evaluate_loss(grafted.net1, data, tc.loss).total <= evaluate_loss(baseline.net, data, tc.loss).total;
    }
    return Outcome{wins >= 12, fmt("grafted <= baseline in %d/20 seeds (need 12)", wins)};
  });

  criterion(10, "pseudo-label pipeline", 0, [] {
    Rng rng(10);
    bool monotone = true;
    for (int t = 0; t < 20; ++t) {
      const auto f = oracle::random_features(50 + rng.below(150), 2 + rng.below(6), rng);
      const auto r = kmeans(f, {2 + rng.below(10), 300, 0.0, std::uint64_t(t)});
      for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
        monotone = monotone && r.inertia_history[i] <= r.inertia_history[i - 1];
      }
    }
    std::vector<std::string> ids;
    std::vector<float> data;
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < 30; ++i) {
        ids.push_back("p" + std::to_string(b) + "_" + std::to_string(i));
        data.push_back(float(100.0 * b + rng.normal()));
        data.push_back(float(rng.normal()));
      }
    }
    const auto blobs = kmeans(FeatureSet(ids, 2, data), {2, 100, 1e-9, 4});
    bool recovered = true;
    for (std::size_t i = 0; i < 60; ++i) recovered = recovered && ((blobs.assignments[i] == blobs.assignments[0]) == (i < 30));

    LabelTable train, fake;
    for (int i = 0; i < 1645; ++i) train.add("train" + std::to_string(i), {i, 0});
    for (int i = 0; i < 330; ++i) fake.add("test" + std::to_string(i), {1645 + i, 0});
    const std::size_t merged = merge_datasets(train, fake).identities().size();
    return Outcome{monotone && recovered && merged == 1975,
                   fmt("inertia non-increasing: %s; blobs recovered: %s; 1645 + 330 ids merge to %zu",
                       monotone ? "yes" : "no", recovered ? "yes" : "no", merged)};
  });

  criterion(11, "learning-rate schedule", 0, [] {
    const LrSchedule s;
    bool ok = true;
    for (std::size_t e = 0; e < 1200; ++e) {
      const double want = e < 300 ? 0.03 : e < 600 ? 0.003 : e < 900 ? 3e-4 : 3e-5;
      ok = ok && std::abs(lr_at(s, e) - want) <= 1e-15;
    }
    return Outcome{ok, fmt("lr(0)=%g lr(300)=%g lr(600)=%g lr(900)=%g", lr_at(s, 0), lr_at(s, 300),
                           lr_at(s, 600), lr_at(s, 900))};
  });

  criterion(12, "pipeline runs are byte-identical", 0, [] {
    const auto data = generate(retrieval_fixture(12));
    const auto split = split_query_gallery(data, 1, 12);
    const QG v = split_views(data.features, split);
    const PipelineInputs in{{v.q}, {v.g}, restrict_tracks(data.tracks, v.g), data.labels};
    const PipelineConfig cfg;
    const auto root = fs::temp_directory_path() / "reid_acceptance_determinism";
    fs::remove_all(root);
    for (const char* run : {"1", "2"}) {
      fs::create_directories(root / run);
      write_pipeline_outputs(run_pipeline(cfg, in), cfg, root / run);
    }
    int same = 0, total = 0;
    for (const auto& entry : fs::directory_iterator(root / "1")) {
      ++total;
      same += slurp(entry.path()) == slurp(root / "2" / entry.path().filename());
    }
    fs::remove_all(root);
    return Outcome{total > 0 && same == total, fmt("%d/%d output files identical", same, total)};
  });

  std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
