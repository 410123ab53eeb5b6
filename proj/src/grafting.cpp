#include "reid/grafting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <thread>

#include "reid/errors.hpp"

namespace reid {
namespace {

void check_same_architecture(const ToyNet& a, const ToyNet& b) {
  bool same = a.layers.size() == b.layers.size() && a.classifier.same_shape(b.classifier) &&
              a.bnneck.has_value() == b.bnneck.has_value();
  for (std::size_t l = 0; same && l < a.layers.size(); ++l) {
    same = a.layers[l].weight.same_shape(b.layers[l].weight) &&
           a.layers[l].bias.size() == b.layers[l].bias.size();
  }
  if (!same) throw ValidationError("grafting requires two networks with identical architecture");
}

void blend_into(std::vector<double>& out, const std::vector<double>& self,
                const std::vector<double>& other, double alpha) {
  out = graft_layer(self, other, alpha);
}

void blend_bn(BatchNorm& out, const BatchNorm& self, const BatchNorm& other, double alpha) {
  blend_into(out.gamma, self.gamma, other.gamma, alpha);
  blend_into(out.beta, self.beta, other.beta, alpha);
  blend_into(out.running_mean, self.running_mean, other.running_mean, alpha);
  blend_into(out.running_var, self.running_var, other.running_var, alpha);
}

}  // namespace

void GraftConfig::validate() const {
  if (!(a_coef > 0.0) || !(c_coef > 0.0)) throw ValidationError("graft A and C must be > 0");
  if (bins < 2) throw ValidationError("graft entropy bins must be >= 2");
  if (!(clamp > 0.0 && clamp < 0.5)) throw ValidationError("graft clamp must be in (0, 0.5)");
  if (force_alpha && !(*force_alpha >= 0.0 && *force_alpha <= 1.0)) {
    throw ValidationError("forced graft alpha must be in [0, 1]");
  }
}

double weight_entropy(std::span<const double> weights, std::size_t bins) {
  if (weights.empty()) throw ValidationError("entropy of an empty tensor is undefined");
  if (bins < 2) throw ValidationError("entropy needs at least 2 bins");
  const auto [lo_it, hi_it] = std::minmax_element(weights.begin(), weights.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ValidationError("non-finite weight");
  if (lo == hi) return 0.0;
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / double(bins);
  for (double w : weights) {
    auto b = std::size_t((w - lo) / width);
    ++counts[std::min(b, bins - 1)];
  }
  double h = 0.0;
  const double n = double(weights.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double q = double(c) / n;
    h -= q * std::log(q);
  }
  return h;
}

double graft_alpha(double h_self, double h_other, const GraftConfig& cfg) {
  if (cfg.force_alpha) return *cfg.force_alpha;
  const double raw = cfg.a_coef * std::atan(cfg.c_coef * (h_self - h_other)) + 0.5;
  return std::clamp(raw, cfg.clamp, 1.0 - cfg.clamp);
}

std::vector<double> graft_layer(std::span<const double> w_self, std::span<const double> w_other,
                                double alpha) {
  if (w_self.size() != w_other.size()) throw ValidationError("grafted tensors differ in shape");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("graft alpha must be in [0, 1]");
  std::vector<double> out(w_self.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Equal entries are kept as-is so the blend is exactly the identity there.
    out[i] = w_self[i] == w_other[i] ? w_self[i] : alpha * w_self[i] + (1.0 - alpha) * w_other[i];
  }
  return out;
}

Matrix graft_layer(const Matrix& w_self, const Matrix& w_other, double alpha) {
  if (!w_self.same_shape(w_other)) throw ValidationError("grafted tensors differ in shape");
  return Matrix(w_self.rows, w_self.cols, graft_layer(w_self.data, w_other.data, alpha));
}

std::size_t graft_layer_count(const ToyNet& net) { return net.layers.size() + 1; }

GraftStepResult graft_step(const ToyNet& m1, const ToyNet& m2, const GraftConfig& cfg) {
  cfg.validate();
  check_same_architecture(m1, m2);
  GraftStepResult out{m1, m2, {}};
  const std::size_t nl = m1.layers.size();

  for (std::size_t l = 0; l <= nl; ++l) {
    const bool is_classifier = l == nl;
    const Matrix& w1 = is_classifier ? m1.classifier : m1.layers[l].weight;
    const Matrix& w2 = is_classifier ? m2.classifier : m2.layers[l].weight;
    GraftLayerRecord rec;
    rec.layer = l;
    rec.entropy_m1 = weight_entropy(w1.data, cfg.bins);
    rec.entropy_m2 = weight_entropy(w2.data, cfg.bins);
    rec.alpha_m1 = graft_alpha(rec.entropy_m1, rec.entropy_m2, cfg);
    rec.alpha_m2 = graft_alpha(rec.entropy_m2, rec.entropy_m1, cfg);

    if (is_classifier) {
      out.m1.classifier = graft_layer(w1, w2, rec.alpha_m1);
      out.m2.classifier = graft_layer(w2, w1, rec.alpha_m2);
    } else {
      out.m1.layers[l].weight = graft_layer(w1, w2, rec.alpha_m1);
      out.m2.layers[l].weight = graft_layer(w2, w1, rec.alpha_m2);
      blend_into(out.m1.layers[l].bias, m1.layers[l].bias, m2.layers[l].bias, rec.alpha_m1);
      blend_into(out.m2.layers[l].bias, m2.layers[l].bias, m1.layers[l].bias, rec.alpha_m2);
      if (l + 1 == nl && m1.bnneck) {
        blend_bn(*out.m1.bnneck, *m1.bnneck, *m2.bnneck, rec.alpha_m1);
        blend_bn(*out.m2.bnneck, *m2.bnneck, *m1.bnneck, rec.alpha_m2);
      }
    }
    out.layers.push_back(rec);
  }
  return out;
}

ParallelGraftResult parallel_train_with_grafting(const ToyNet& net1, const ToyNet& net2,
                                                 const TrainingSet& data, const TrainConfig& train_cfg,
                                                 const GraftConfig& graft_cfg, std::size_t epochs,
                                                 std::uint64_t seed1, std::uint64_t seed2) {
  graft_cfg.validate();
  check_same_architecture(net1, net2);
  Trainer t1(net1, data, train_cfg, seed1);
  Trainer t2(net2, data, train_cfg, seed2);
  ParallelGraftResult out;

  for (std::size_t e = 0; e < epochs; ++e) {
    std::exception_ptr failure;
    {
      std::jthread second([&] {
        try {
          t2.run_epoch();
        } catch (...) {
          failure = std::current_exception();
        }
      });
      t1.run_epoch();
    }
    if (failure) std::rethrow_exception(failure);
    auto grafted = graft_step(t1.net(), t2.net(), graft_cfg);
    t1.net() = std::move(grafted.m1);
    t2.net() = std::move(grafted.m2);
    for (const auto& rec : grafted.layers) out.grafts.push_back({e, rec});
  }
  out.net1 = t1.net();
  out.net2 = t2.net();
  out.trace1 = t1.trace();
  out.trace2 = t2.trace();
  return out;
}

void write_graft_trace(const std::vector<GraftTraceRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "epoch,layer,alpha_m1,alpha_m2,entropy_m1,entropy_m2\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%zu,%zu,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.record.layer,
                  r.record.alpha_m1, r.record.alpha_m2, r.record.entropy_m1, r.record.entropy_m2);
    out << line;
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

}  // namespace reid
