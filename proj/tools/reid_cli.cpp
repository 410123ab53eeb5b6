// reid: command-line front end for the re-identification post-processing
// library. Exit status: 0 success, 1 validation/usage error, 2 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "reid/ensemble.hpp"
#include "reid/errors.hpp"
#include "reid/grafting.hpp"
#include "reid/io.hpp"
#include "reid/metrics.hpp"
#include "reid/pipeline.hpp"
#include "reid/pseudo_label.hpp"
#include "reid/rerank.hpp"
#include "reid/synth.hpp"
#include "reid/trainer.hpp"

namespace fs = std::filesystem;
using namespace reid;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

fs::path ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  return dir;
}

struct GenArgs {
  SynthConfig synth;
  std::size_t queries_per_id = 1;
  std::size_t views = 1;
  double model_noise = 0.0;
  std::uint64_t split_seed = 1;
  fs::path out_dir = "data";
};

void run_gen(const GenArgs& a) {
  ensure_dir(a.out_dir);
  const SynthDataset data = generate(a.synth);
  const auto split = split_query_gallery(data, a.queries_per_id, a.split_seed);
  const FeatureSet gallery0 = select_rows(data.features, split.gallery_ids);

  write_labels(data.labels, a.out_dir / "labels.csv");
  write_tracks(restrict_tracks(data.tracks, gallery0), a.out_dir / "tracks.txt");
  write_features(data.features, a.out_dir / "all.rrf");
  if (a.views == 1 && a.model_noise == 0.0) {
    write_features(select_rows(data.features, split.query_ids), a.out_dir / "query.rrf");
    write_features(gallery0, a.out_dir / "gallery.rrf");
    return;
  }
  const auto views = generate_multiview(a.synth, a.views, a.model_noise);
  for (std::size_t m = 0; m < views.size(); ++m) {
    const std::string tag = "_" + std::to_string(m) + ".rrf";
    write_features(select_rows(views[m], split.query_ids), a.out_dir / ("query" + tag));
    write_features(select_rows(views[m], split.gallery_ids), a.out_dir / ("gallery" + tag));
  }
}

struct TrainArgs {
  fs::path features;
  fs::path labels;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  std::uint64_t seed2 = 2;
  std::vector<std::size_t> hidden = {32};
  std::size_t embedding = 16;
  bool no_bnneck = false;
  TrainConfig train;
  GraftConfig graft;
  fs::path trace = "loss_trace.csv";
  fs::path trace2 = "loss_trace_net2.csv";
  fs::path graft_trace = "graft_trace.csv";
};

ToyNetShape shape_for(const TrainArgs& a, const TrainingSet& data) {
  return ToyNetShape{data.features().dim(), a.hidden, a.embedding, data.classes(), !a.no_bnneck};
}

void print_final_loss(const char* label, const ToyNet& net, const TrainingSet& data,
                      const LossConfig& loss) {
  const auto l = evaluate_loss(net, data, loss);
  std::printf("%s final loss: total %.6f  cross-entropy %.6f  triplet %.6f\n", label, l.total,
              l.cross_entropy, l.triplet);
}

void run_train(const TrainArgs& a) {
  const TrainingSet data(read_features(a.features), read_labels(a.labels));
  const ToyNet net = make_toy_net(shape_for(a, data), a.seed);
  const auto result = train(net, data, a.train, a.epochs, a.seed);
  write_loss_trace(result.trace, a.trace);
  print_final_loss("net", result.net, data, a.train.loss);
}

void run_graft(const TrainArgs& a) {
  const TrainingSet data(read_features(a.features), read_labels(a.labels));
  const ToyNet n1 = make_toy_net(shape_for(a, data), a.seed);
  const ToyNet n2 = make_toy_net(shape_for(a, data), a.seed2);
  const auto result =
      parallel_train_with_grafting(n1, n2, data, a.train, a.graft, a.epochs, a.seed, a.seed2);
  const auto baseline = train(n1, data, a.train, a.epochs, a.seed);
  write_loss_trace(result.trace1, a.trace);
  write_loss_trace(result.trace2, a.trace2);
  write_graft_trace(result.grafts, a.graft_trace);
  print_final_loss("grafted net1", result.net1, data, a.train.loss);
  print_final_loss("baseline    ", baseline.net, data, a.train.loss);
}

void add_train_options(CLI::App* cmd, TrainArgs& a, bool graft) {
  cmd->add_option("--features", a.features, "training features (.rrf)")->required();
  cmd->add_option("--labels", a.labels, "training labels (.csv)")->required();
  cmd->add_option("--epochs", a.epochs, "training epochs");
  cmd->add_option("--seed", a.seed, graft ? "init/sampling seed of net1" : "init/sampling seed");
  cmd->add_option("--hidden", a.hidden, "hidden layer widths");
  cmd->add_option("--embedding", a.embedding, "embedding width");
  cmd->add_flag("--no-bnneck", a.no_bnneck, "drop the BNNeck");
  cmd->add_option("--lr", a.train.schedule.base_lr, "base learning rate");
  cmd->add_option("--warmup", a.train.schedule.warmup_epochs, "linear warmup epochs");
  cmd->add_option("--decay-epochs", a.train.schedule.decay_epochs, "epochs at which lr decays");
  cmd->add_option("--decay-factor", a.train.schedule.decay_factor, "lr decay factor");
  cmd->add_option("--momentum", a.train.momentum, "SGD momentum");
  cmd->add_option("--margin", a.train.loss.margin, "triplet margin");
  cmd->add_option("--balance", a.train.loss.balance, "triplet weight in the combined loss");
  cmd->add_option("--p", a.train.batch.p, "identities per batch");
  cmd->add_option("--k", a.train.batch.k, "instances per identity");
  cmd->add_option("--trace", a.trace, "loss trace CSV");
  if (graft) {
    cmd->add_option("--seed2", a.seed2, "init/sampling seed of net2");
    cmd->add_option("--a-coef", a.graft.a_coef, "grafting A");
    cmd->add_option("--c-coef", a.graft.c_coef, "grafting C");
    cmd->add_option("--bins", a.graft.bins, "entropy histogram bins");
    cmd->add_option("--clamp", a.graft.clamp, "alpha clamp");
    cmd->add_option("--trace2", a.trace2, "loss trace CSV of net2");
    cmd->add_option("--graft-trace", a.graft_trace, "grafting trace CSV");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle re-identification post-processing toolkit"};
  app.require_subcommand(1);

  // gen
  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic labelled dataset");
  gen_cmd->add_option("--out-dir", gen.out_dir, "output directory");
  gen_cmd->add_option("--n-ids", gen.synth.n_ids, "identities");
  gen_cmd->add_option("--per-id", gen.synth.per_id, "images per identity");
  gen_cmd->add_option("--dim", gen.synth.dim, "feature dimension");
  gen_cmd->add_option("--noise", gen.synth.noise_sigma, "per-image noise scale");
  gen_cmd->add_option("--cameras", gen.synth.n_cameras, "cameras");
  gen_cmd->add_option("--camera-bias", gen.synth.camera_bias_sigma, "per-(identity, camera) bias scale");
  gen_cmd->add_option("--seed", gen.synth.seed, "generator seed");
  gen_cmd->add_option("--queries-per-id", gen.queries_per_id, "query images per identity");
  gen_cmd->add_option("--split-seed", gen.split_seed, "query/gallery split seed");
  gen_cmd->add_option("--views", gen.views, "model views to emit");
  gen_cmd->add_option("--model-noise", gen.model_noise, "per-view noise scale");

  // dist
  fs::path query_path, gallery_path, out_path, dist_path, tracks_path, labels_path, ranks_path;
  std::string metric_name_arg = "euclidean";
  auto* dist_cmd = app.add_subcommand("dist", "query x gallery distance matrix");
  dist_cmd->add_option("--query", query_path)->required();
  dist_cmd->add_option("--gallery", gallery_path)->required();
  dist_cmd->add_option("--metric", metric_name_arg, "euclidean or cosine");
  dist_cmd->add_option("--out", out_path, "distance file (.rrd)")->required();

  // rank
  std::optional<std::size_t> rank_top_k;
  auto* rank_cmd = app.add_subcommand("rank", "rank a distance matrix");
  rank_cmd->add_option("--dist", dist_path)->required();
  rank_cmd->add_option("--gallery", gallery_path, "gallery features (for ids)")->required();
  rank_cmd->add_option("--top-k", rank_top_k, "truncate each ranking");
  rank_cmd->add_option("--out", out_path, "ranking file")->required();

  // rerank
  RerankConfig rerank_cfg;
  auto* rerank_cmd = app.add_subcommand("rerank", "k-reciprocal re-ranking");
  rerank_cmd->add_option("--query", query_path)->required();
  rerank_cmd->add_option("--gallery", gallery_path)->required();
  rerank_cmd->add_option("--metric", metric_name_arg);
  rerank_cmd->add_option("--k1", rerank_cfg.k1);
  rerank_cmd->add_option("--k2", rerank_cfg.k2);
  rerank_cmd->add_option("--lambda", rerank_cfg.lambda);
  rerank_cmd->add_option("--out", out_path, "re-ranked distance file (.rrd)")->required();

  // qe
  QueryExpansionConfig qe_cfg;
  auto* qe_cmd = app.add_subcommand("qe", "query expansion");
  qe_cmd->add_option("--query", query_path)->required();
  qe_cmd->add_option("--gallery", gallery_path)->required();
  qe_cmd->add_option("--metric", metric_name_arg);
  qe_cmd->add_option("--top-k", qe_cfg.top_k);
  qe_cmd->add_option("--rounds", qe_cfg.rounds);
  qe_cmd->add_option("--out", out_path, "expanded query features (.rrf)")->required();

  // track-merge
  std::optional<std::size_t> track_limit;
  auto* tm_cmd = app.add_subcommand("track-merge", "average gallery features within tracks");
  tm_cmd->add_option("--gallery", gallery_path)->required();
  tm_cmd->add_option("--tracks", tracks_path)->required();
  tm_cmd->add_option("--limit", track_limit, "images per track to average (default all)");
  tm_cmd->add_option("--out", out_path)->required();

  // ensemble
  std::string strategy_arg = "concat_features";
  std::vector<fs::path> ensemble_inputs;
  auto* ens_cmd = app.add_subcommand("ensemble", "fuse several models");
  ens_cmd->add_option("--strategy", strategy_arg,
                      "concat_features, average_features or average_distance");
  ens_cmd->add_option("--inputs", ensemble_inputs, ".rrf files (.rrd for average_distance)")
      ->required();
  ens_cmd->add_option("--out", out_path)->required();

  // pseudo-label
  KMeansConfig km_cfg;
  int offset = 0;
  std::size_t min_cluster = 1;
  fs::path features_path, merge_with, merged_out;
  auto* pl_cmd = app.add_subcommand("pseudo-label", "k-means fake labels for unlabelled features");
  pl_cmd->add_option("--features", features_path)->required();
  pl_cmd->add_option("--k", km_cfg.k);
  pl_cmd->add_option("--max-iters", km_cfg.max_iters);
  pl_cmd->add_option("--tol", km_cfg.tol);
  pl_cmd->add_option("--seed", km_cfg.seed);
  pl_cmd->add_option("--offset", offset, "first fake identity");
  pl_cmd->add_option("--min-cluster-size", min_cluster);
  pl_cmd->add_option("--out", out_path, "fake label CSV")->required();
  pl_cmd->add_option("--merge-with", merge_with, "labelled training CSV to merge into");
  pl_cmd->add_option("--merged-out", merged_out, "merged label CSV");

  // split
  std::size_t n_val = 50;
  std::uint64_t split_seed = 0;
  fs::path train_out, val_out;
  auto* split_cmd = app.add_subcommand("split", "identity-disjoint self-validation split");
  split_cmd->add_option("--labels", labels_path)->required();
  split_cmd->add_option("--n-val", n_val, "identities moved to val");
  split_cmd->add_option("--seed", split_seed);
  split_cmd->add_option("--train-out", train_out)->required();
  split_cmd->add_option("--val-out", val_out)->required();

  // eval
  EvalOptions eval_opts;
  fs::path csv_path;
  auto* eval_cmd = app.add_subcommand("eval", "mAP and CMC of a ranking file");
  eval_cmd->add_option("--ranks", ranks_path)->required();
  eval_cmd->add_option("--query", query_path, "query features (for ids)")->required();
  eval_cmd->add_option("--gallery", gallery_path, "gallery features (for ids)")->required();
  eval_cmd->add_option("--labels", labels_path)->required();
  eval_cmd->add_option("--max-rank", eval_opts.max_rank);
  eval_cmd->add_flag("--cross-camera", eval_opts.cross_camera,
                     "ignore same-identity same-camera gallery items");
  eval_cmd->add_option("--top-k-map", eval_opts.top_k_map);
  eval_cmd->add_option("--csv", csv_path, "also write the CSV here");

  // train-toy / graft-demo
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train-toy", "train the toy embedding network");
  add_train_options(train_cmd, train_args, false);
  TrainArgs graft_args;
  auto* graft_cmd = app.add_subcommand("graft-demo", "train two nets with mutual filter grafting");
  add_train_options(graft_cmd, graft_args, true);

  // pipeline
  fs::path config_path, out_dir = "out";
  std::vector<std::string> overrides;
  std::vector<fs::path> query_views, gallery_views;
  auto* pipe_cmd = app.add_subcommand("pipeline", "full post-processing pipeline");
  pipe_cmd->add_option("--config", config_path, "INI config file");
  pipe_cmd->add_option("--set", overrides, "config override section.key=value");
  pipe_cmd->add_option("--query", query_views, "query features, one per model")->required();
  pipe_cmd->add_option("--gallery", gallery_views, "gallery features, one per model")->required();
  pipe_cmd->add_option("--labels", labels_path, "ground truth for evaluation");
  pipe_cmd->add_option("--tracks", tracks_path, "gallery tracks");
  pipe_cmd->add_option("--out-dir", out_dir);

  // submit
  std::size_t submit_top_k = 100;
  auto* submit_cmd = app.add_subcommand("submit", "write a top-k submission from distances");
  submit_cmd->add_option("--dist", dist_path)->required();
  submit_cmd->add_option("--gallery", gallery_path, "gallery features (for ids)")->required();
  submit_cmd->add_option("--top-k", submit_top_k);
  submit_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  auto* cmd = app.get_subcommands().front();
  try {
    const std::string name = cmd->get_name();
    if (cmd == gen_cmd) {
      run_gen(gen);
    } else if (cmd == dist_cmd) {
      write_distances(distance_matrix(read_features(query_path), read_features(gallery_path),
                                      parse_metric(metric_name_arg)),
                      out_path);
    } else if (cmd == rank_cmd) {
      const auto gallery = read_features(gallery_path);
      const auto dist = read_distances(dist_path);
      if (dist.cols() != gallery.size()) {
        throw ValidationError("distance file '" + dist_path.string() + "' has " +
                              std::to_string(dist.cols()) + " columns, gallery has " +
                              std::to_string(gallery.size()) + " rows");
      }
      write_submission(rank(dist), gallery.ids(), rank_top_k.value_or(gallery.size() ? gallery.size() : 1),
                       out_path);
    } else if (cmd == rerank_cmd) {
      write_distances(k_reciprocal_rerank(read_features(query_path), read_features(gallery_path),
                                          parse_metric(metric_name_arg), rerank_cfg),
                      out_path);
    } else if (cmd == qe_cmd) {
      write_features(query_expansion(read_features(query_path), read_features(gallery_path),
                                     parse_metric(metric_name_arg), qe_cfg),
                     out_path);
    } else if (cmd == tm_cmd) {
      write_features(gallery_track_merge(read_features(gallery_path), read_tracks(tracks_path),
                                         TrackMergeConfig{track_limit}),
                     out_path);
    } else if (cmd == ens_cmd) {
      const auto strategy = parse_ensemble_strategy(strategy_arg);
      if (strategy == EnsembleStrategy::average_distance) {
        std::vector<DistanceMatrix> mats;
        for (const auto& p : ensemble_inputs) mats.push_back(read_distances(p));
        write_distances(average_distance(mats), out_path);
      } else {
        std::vector<FeatureSet> sets;
        for (const auto& p : ensemble_inputs) sets.push_back(read_features(p));
        write_features(strategy == EnsembleStrategy::concat_features ? concat_features(sets)
                                                                     : average_features(sets),
                       out_path);
      }
    } else if (cmd == pl_cmd) {
      const auto features = read_features(features_path);
      const auto clusters = kmeans(features, km_cfg);
      const auto fake = assign_fake_labels(clusters, features.ids(), offset, min_cluster);
      write_labels(fake, out_path);
      std::printf("clusters: %zu  fake identities: %zu  labelled images: %zu  inertia: %.6f  iterations: %zu\n",
                  clusters.k, fake.identities().size(), fake.size(), clusters.inertia,
                  clusters.iterations_run);
      if (!merge_with.empty()) {
        if (merged_out.empty()) throw ValidationError("--merge-with needs --merged-out");
        const auto merged = merge_datasets(read_labels(merge_with), fake);
        write_labels(merged, merged_out);
        std::printf("merged identities: %zu  merged images: %zu\n", merged.identities().size(),
                    merged.size());
      }
    } else if (cmd == split_cmd) {
      const auto split = selfval_split(read_labels(labels_path), n_val, split_seed);
      write_labels(split.train, train_out);
      write_labels(split.val, val_out);
    } else if (cmd == eval_cmd) {
      const auto labels = read_labels(labels_path);
      const auto query = read_features(query_path);
      const auto gallery = read_features(gallery_path);
      const auto result = evaluate(read_submission(ranks_path, gallery.ids()), query.ids(),
                                   gallery.ids(), labels, labels, eval_opts);
      const std::string csv = eval_csv(result);
      std::cout << eval_table(result) << "\n" << csv;
      if (!csv_path.empty()) write_text(csv_path, csv);
    } else if (cmd == train_cmd) {
      run_train(train_args);
    } else if (cmd == graft_cmd) {
      run_graft(graft_args);
    } else if (cmd == pipe_cmd) {
      PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
      for (const auto& o : overrides) cfg.set(o);
      PipelineInputs inputs;
      for (const auto& p : query_views) inputs.query_views.push_back(read_features(p));
      for (const auto& p : gallery_views) inputs.gallery_views.push_back(read_features(p));
      if (!labels_path.empty()) inputs.labels = read_labels(labels_path);
      if (!tracks_path.empty()) inputs.tracks = read_tracks(tracks_path);
      const auto result = run_pipeline(cfg, inputs);
      write_pipeline_outputs(result, cfg, ensure_dir(out_dir));
      write_text(out_dir / "config.ini", cfg.to_string());
      if (result.eval) std::cout << eval_table(*result.eval) << "\n" << eval_csv(*result.eval);
    } else if (cmd == submit_cmd) {
      const auto gallery = read_features(gallery_path);
      write_submission(rank(read_distances(dist_path)), gallery.ids(), submit_top_k, out_path);
    }
  } catch (const IoError& e) {
    std::cerr << "reid " << cmd->get_name() << ": I/O error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "reid " << cmd->get_name() << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
