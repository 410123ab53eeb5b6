#include "reid/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reid/errors.hpp"
#include "reid/rng.hpp"

namespace reid {

CropOffset center_crop_offset(std::size_t height, std::size_t width, std::size_t out_h,
                              std::size_t out_w) {
  if (out_h > height || out_w > width) {
    throw ValidationError("crop " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                          " is larger than input " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
  return {(height - out_h) / 2, (width - out_w) / 2};
}

Tensor center_crop(const Tensor& t, std::size_t out_h, std::size_t out_w) {
  const auto off = center_crop_offset(t.height, t.width, out_h, out_w);
  Tensor out(out_h, out_w, t.channels);
  for (std::size_t y = 0; y < out_h; ++y) {
    const float* src = &t.data[((off.top + y) * t.width + off.left) * t.channels];
    std::copy(src, src + out_w * t.channels, &out.data[y * out_w * t.channels]);
  }
  return out;
}

Tensor horizontal_flip(const Tensor& t) {
  Tensor out(t.height, t.width, t.channels);
  for (std::size_t y = 0; y < t.height; ++y) {
    for (std::size_t x = 0; x < t.width; ++x) {
      for (std::size_t c = 0; c < t.channels; ++c) out.at(y, t.width - 1 - x, c) = t.at(y, x, c);
    }
  }
  return out;
}

std::vector<double> flip_averaged_feature(const EmbedFn& embed, const Tensor& t) {
  std::vector<double> a = embed(t);
  const std::vector<double> b = embed(horizontal_flip(t));
  if (a.size() != b.size()) throw ValidationError("embedding size changed under flipping");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] + b[i]) / 2.0;
  return a;
}

EraseRegion random_erase_region(std::size_t height, std::size_t width, std::uint64_t seed,
                                std::pair<double, double> area_frac_range) {
  const auto [lo, hi] = area_frac_range;
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
    throw ValidationError("random erase area fraction range must satisfy 0 < lo <= hi <= 1");
  }
  if (height == 0 || width == 0) throw ValidationError("cannot erase from an empty tensor");
  constexpr double kMinAspect = 0.3;
  Rng rng(seed);
  const double area = double(height) * double(width);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double target = rng.uniform(lo, hi) * area;
    const double aspect = std::exp(rng.uniform(std::log(kMinAspect), std::log(1.0 / kMinAspect)));
    const auto h = std::size_t(std::lround(std::sqrt(target * aspect)));
    const auto w = std::size_t(std::lround(std::sqrt(target / aspect)));
    if (h == 0 || w == 0 || h > height || w > width) continue;
    const std::size_t top = rng.below(height - h + 1);
    const std::size_t left = rng.below(width - w + 1);
    return {top, left, h, w};
  }
  const auto side = std::size_t(std::max<long>(1, std::lround(std::sqrt(lo * area))));
  const std::size_t h = std::min(side, height);
  const std::size_t w = std::min(side, width);
  return {(height - h) / 2, (width - w) / 2, h, w};
}

Tensor random_erase(const Tensor& t, std::uint64_t seed, std::pair<double, double> area_frac_range,
                    float fill) {
  const auto r = random_erase_region(t.height, t.width, seed, area_frac_range);
  Tensor out = t;
  for (std::size_t y = r.top; y < r.top + r.height; ++y) {
    for (std::size_t x = r.left; x < r.left + r.width; ++x) {
      for (std::size_t c = 0; c < t.channels; ++c) out.at(y, x, c) = fill;
    }
  }
  return out;
}

}  // namespace reid
