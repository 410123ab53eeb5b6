#include "reid/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "reid/errors.hpp"
#include "reid/io.hpp"

namespace reid {
namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\v\f";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::string qualified(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

bool parse_bool(std::string_view v, const std::string& name) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ValidationError(name + " expects a boolean, got '" + std::string(v) + "'");
}

std::uint64_t parse_unsigned(std::string_view v, const std::string& name) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError(name + " expects a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view v, const std::string& name) {
  std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw ValidationError(name + " expects a finite number, got '" + s + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Runs one stage, prefixing any library error with the stage name.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    rethrow_with_context(std::string("stage '") + name + "'");
  }
}

}  // namespace

void PipelineConfig::set(std::string_view section, std::string_view key, std::string_view value) {
  const std::string name = qualified(section, key);
  value = trim(value);
  auto as_size = [&] { return std::size_t(parse_unsigned(value, name)); };

  if (section == "metric") {
    if (key == "type") return void(metric = parse_metric(value));
  } else if (section == "ensemble") {
    if (key == "strategy") return void(ensemble = parse_ensemble_strategy(value));
  } else if (section == "track_merge") {
    if (key == "enabled") return void(track_merge_enabled = parse_bool(value, name));
    if (key == "per_track_limit") {
      if (value == "all") return void(track_merge.per_track_limit.reset());
      return void(track_merge.per_track_limit = as_size());
    }
  } else if (section == "query_expansion") {
    if (key == "enabled") return void(query_expansion_enabled = parse_bool(value, name));
    if (key == "top_k") return void(query_expansion.top_k = as_size());
    if (key == "rounds") return void(query_expansion.rounds = as_size());
  } else if (section == "rerank") {
    if (key == "enabled") return void(rerank_enabled = parse_bool(value, name));
    if (key == "k1") return void(rerank.k1 = as_size());
    if (key == "k2") return void(rerank.k2 = as_size());
    if (key == "lambda") return void(rerank.lambda = parse_double(value, name));
  } else if (section == "kmeans") {
    if (key == "k") return void(kmeans.k = as_size());
    if (key == "max_iters") return void(kmeans.max_iters = as_size());
    if (key == "tol") return void(kmeans.tol = parse_double(value, name));
    if (key == "seed") return void(kmeans.seed = parse_unsigned(value, name));
    if (key == "identity_offset") {
      const auto v = parse_unsigned(value, name);
      if (v > std::uint64_t(INT32_MAX)) throw ValidationError(name + " is too large");
      return void(identity_offset = int(v));
    }
    if (key == "min_cluster_size") return void(min_cluster_size = as_size());
  } else if (section == "eval") {
    if (key == "max_rank") return void(eval.max_rank = as_size());
    if (key == "cross_camera") return void(eval.cross_camera = parse_bool(value, name));
    if (key == "top_k_map") {
      if (value == "none") return void(eval.top_k_map.reset());
      return void(eval.top_k_map = as_size());
    }
  } else if (section == "submit") {
    if (key == "top_k") return void(submit_top_k = as_size());
  } else {
    throw ValidationError("unknown config section '" + std::string(section) + "'");
  }
  throw ValidationError("unknown config key '" + name + "'");
}

void PipelineConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw ValidationError("expected 'section.key=value', got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
      assignment.substr(eq + 1));
}

void PipelineConfig::validate() const {
  track_merge.validate();
  query_expansion.validate();
  rerank.validate();
  if (eval.max_rank < 1) throw ValidationError("eval.max_rank must be >= 1");
  if (eval.top_k_map && *eval.top_k_map < 1) throw ValidationError("eval.top_k_map must be >= 1");
  if (submit_top_k < 1) throw ValidationError("submit.top_k must be >= 1");
  if (kmeans.k < 1 || kmeans.max_iters < 1) throw ValidationError("kmeans.k and kmeans.max_iters must be >= 1");
  if (!(kmeans.tol >= 0.0)) throw ValidationError("kmeans.tol must be >= 0");
}

PipelineConfig PipelineConfig::parse(std::string_view text, std::string_view source) {
  PipelineConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(source) + " line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError(where + ": expected 'key = value'");
    if (section.empty()) throw ValidationError(where + ": key outside of any section");
    try {
      cfg.set(section, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error&) {
      rethrow_with_context(where);
    }
    if (end == text.size()) break;
  }
  try {
    cfg.validate();
  } catch (const Error&) {
    rethrow_with_context(std::string(source));
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text, path.string());
}

std::string PipelineConfig::to_string() const {
  std::ostringstream out;
  auto flag = [](bool b) { return b ? "true" : "false"; };
  out << "[metric]\ntype = " << metric_name(metric) << "\n\n";
  out << "[ensemble]\nstrategy = " << ensemble_strategy_name(ensemble) << "\n\n";
  out << "[track_merge]\nenabled = " << flag(track_merge_enabled) << "\nper_track_limit = "
      << (track_merge.per_track_limit ? std::to_string(*track_merge.per_track_limit) : "all")
      << "\n\n";
  out << "[query_expansion]\nenabled = " << flag(query_expansion_enabled)
      << "\ntop_k = " << query_expansion.top_k << "\nrounds = " << query_expansion.rounds << "\n\n";
  out << "[rerank]\nenabled = " << flag(rerank_enabled) << "\nk1 = " << rerank.k1
      << "\nk2 = " << rerank.k2 << "\nlambda = " << format_double(rerank.lambda) << "\n\n";
  out << "[kmeans]\nk = " << kmeans.k << "\nmax_iters = " << kmeans.max_iters
      << "\ntol = " << format_double(kmeans.tol) << "\nseed = " << kmeans.seed
      << "\nidentity_offset = " << identity_offset << "\nmin_cluster_size = " << min_cluster_size
      << "\n\n";
  out << "[eval]\nmax_rank = " << eval.max_rank << "\ncross_camera = " << flag(eval.cross_camera)
      << "\ntop_k_map = " << (eval.top_k_map ? std::to_string(*eval.top_k_map) : "none") << "\n\n";
  out << "[submit]\ntop_k = " << submit_top_k << "\n";
  return out.str();
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineInputs& inputs) {
  stage("config", [&] { cfg.validate(); });
  const std::size_t views = inputs.query_views.size();
  stage("load", [&] {
    if (views == 0) throw ValidationError("no query feature sets given");
    if (inputs.gallery_views.size() != views) {
      throw ValidationError("got " + std::to_string(views) + " query feature sets but " +
                            std::to_string(inputs.gallery_views.size()) + " gallery feature sets");
    }
  });

  // Per-model query/gallery pairs that flow through the feature stages.
  std::vector<FeatureSet> queries = inputs.query_views;
  std::vector<FeatureSet> gallery = inputs.gallery_views;

  if (views > 1 && cfg.ensemble != EnsembleStrategy::average_distance) {
    stage("ensemble", [&] {
      auto fuse = cfg.ensemble == EnsembleStrategy::concat_features ? concat_features : average_features;
      FeatureSet q = fuse(queries);
      FeatureSet g = fuse(gallery);
      queries.assign(1, std::move(q));
      gallery.assign(1, std::move(g));
    });
  }

  if (cfg.track_merge_enabled && inputs.tracks) {
    stage("track-merge", [&] {
      for (auto& g : gallery) g = gallery_track_merge(g, *inputs.tracks, cfg.track_merge);
    });
  }

  if (cfg.query_expansion_enabled) {
    stage("query-expansion", [&] {
      for (std::size_t v = 0; v < queries.size(); ++v) {
        queries[v] = query_expansion(queries[v], gallery[v], cfg.metric, cfg.query_expansion);
      }
    });
  }

  std::vector<DistanceMatrix> qg;
  std::vector<DistanceMatrix> qq;
  std::vector<DistanceMatrix> gg;
  stage("distance", [&] {
    for (std::size_t v = 0; v < queries.size(); ++v) {
      qg.push_back(distance_matrix(queries[v], gallery[v], cfg.metric));
      if (cfg.rerank_enabled) {
        qq.push_back(distance_matrix(queries[v], queries[v], cfg.metric));
        gg.push_back(distance_matrix(gallery[v], gallery[v], cfg.metric));
      }
    }
    if (qg.size() > 1) {
      qg.assign(1, average_distance(qg));
      if (cfg.rerank_enabled) {
        qq.assign(1, average_distance(qq));
        gg.assign(1, average_distance(gg));
      }
    }
  });

  PipelineResult result;
  result.query_ids = queries.front().ids();
  result.gallery_ids = gallery.front().ids();
  result.distances = std::move(qg.front());

  if (cfg.rerank_enabled) {
    stage("rerank", [&] {
      result.distances = k_reciprocal_rerank(result.distances, qq.front(), gg.front(), cfg.rerank);
    });
  }

  result.ranks = stage("rank", [&] { return rank(result.distances); });

  if (inputs.labels) {
    result.eval = stage("eval", [&] {
      return evaluate(result.ranks, result.query_ids, result.gallery_ids, *inputs.labels,
                      *inputs.labels, cfg.eval);
    });
  }
  return result;
}

std::string eval_csv(const EvalResult& result) {
  std::string out = "name,value\n";
  out += "mAP," + format_double(result.map) + "\n";
  out += "evaluated_queries," + std::to_string(result.evaluated_queries) + "\n";
  for (std::size_t r = 0; r < result.cmc.size(); ++r) {
    out += "cmc@" + std::to_string(r + 1) + "," + format_double(result.cmc[r]) + "\n";
  }
  return out;
}

std::string eval_table(const EvalResult& result) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "queries evaluated : %zu\n", result.evaluated_queries);
  out += buf;
  std::snprintf(buf, sizeof buf, "mAP               : %.4f\n", result.map);
  out += buf;
  for (std::size_t r : {1, 5, 10, 20}) {
    if (r > result.cmc.size()) break;
    std::snprintf(buf, sizeof buf, "CMC rank-%-2zu       : %.4f\n", r, result.cmc[r - 1]);
    out += buf;
  }
  return out;
}

void write_pipeline_outputs(const PipelineResult& result, const PipelineConfig& cfg,
                            const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  write_submission(result.ranks, result.gallery_ids, cfg.submit_top_k, out_dir / "ranks.txt");
  write_distances(result.distances, out_dir / "distances.rrd");
  if (result.eval) {
    auto write_text = [](const std::filesystem::path& p, const std::string& text) {
      std::ofstream out(p, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
      out << text;
      if (!out) throw IoError("write failed on '" + p.string() + "'");
    };
    write_text(out_dir / "eval.csv", eval_csv(*result.eval));
    write_text(out_dir / "eval.txt", eval_table(*result.eval));
  }
}

}  // namespace reid
