#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace reid {

// H x W x C image tensor, channel-last, row-major.
struct Tensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return data[(y * width + x) * channels + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * channels + c];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct CropOffset {
  std::size_t top = 0;
  std::size_t left = 0;
};

// Offsets of the centred out_h x out_w window: floor((H - out_h) / 2), same for W.
CropOffset center_crop_offset(std::size_t height, std::size_t width, std::size_t out_h,
                              std::size_t out_w);

Tensor center_crop(const Tensor& t, std::size_t out_h, std::size_t out_w);

// Mirrors the W axis.
Tensor horizontal_flip(const Tensor& t);

using EmbedFn = std::function<std::vector<double>(const Tensor&)>;

// (embed(t) + embed(horizontal_flip(t))) / 2.
std::vector<double> flip_averaged_feature(const EmbedFn& embed, const Tensor& t);

struct EraseRegion {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

// Picks one seeded rectangle covering a fraction of the image area drawn from
// area_frac_range, with aspect ratio in [0.3, 1/0.3]; after 100 rejected
// draws it falls back to a square clipped to the image.
EraseRegion random_erase_region(std::size_t height, std::size_t width, std::uint64_t seed,
                                std::pair<double, double> area_frac_range);

// Overwrites the random_erase_region rectangle with `fill` in every channel.
Tensor random_erase(const Tensor& t, std::uint64_t seed, std::pair<double, double> area_frac_range,
                    float fill);

}  // namespace reid
