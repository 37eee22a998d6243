#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cinesr/image.hpp"

namespace cinesr::degrade {

enum class DegradationMode { realistic, bicubic_only };

struct DegradationConfig {
  DegradationMode mode = DegradationMode::realistic;
  int scale = 4;

  std::vector<int> blur_kernel_sizes = {7, 9, 11, 13, 15, 17, 19, 21};
  std::array<double, 2> blur_sigma_range = {0.2, 3.0};
  std::array<double, 2> resize_range = {0.3, 1.5};
  std::array<double, 2> noise_sigma_range = {0.0, 0.06};
  std::array<int, 2> jpeg_quality_range = {30, 95};

  bool second_order = true;
  std::array<double, 2> blur_sigma_range2 = {0.2, 1.5};
  std::array<double, 2> resize_range2 = {0.6, 1.2};
  std::array<double, 2> noise_sigma_range2 = {0.0, 0.04};
  std::array<int, 2> jpeg_quality_range2 = {30, 95};

  double blur_prob = 1.0;
  double resize_prob = 1.0;
  double noise_prob = 1.0;
  double jpeg_prob = 1.0;
  double second_blur_prob = 0.8;
  double sinc_prob = 0.8;  // final ringing filter, else identity

  void validate() const;  // raises InvalidConfig
};

// Separable Catmull-Rom (a = -0.5) resample to an explicit target shape,
// border replicate, output clamped to [0,1].
Image bicubic_resize_to(const Image& img, int out_h, int out_w);

// Output shape is round(H*scale) x round(W*scale).
Image bicubic_resize(const Image& img, double scale);

// Bicubic 1/scale downsample of each frame; H and W must be divisible by
// scale.
std::vector<Image> degrade_bicubic(const std::vector<Image>& frames, int scale);

// Randomized blur/resize/noise/JPEG chain (optionally applied twice), ending
// with a resize to exactly H/scale x W/scale and a sinc-or-identity final
// filter. All random draws are shared across the frames of one call so a
// triplet stays temporally consistent. Deterministic given seed.
std::vector<Image> degrade_realistic(const std::vector<Image>& frames, const DegradationConfig& config,
                                     std::uint64_t seed);

// 8-bit JPEG-equivalent round trip on the gray channel: 8x8 DCT blocks
// quantized with the standard luminance table at the given quality (1..100).
Image jpeg_roundtrip(const Image& img, int quality);

// Circular low-pass (windowed jinc) kernel of odd size; cutoff in (0, pi].
std::vector<float> sinc_kernel(int ksize, double cutoff);

Image convolve2d_replicate(const Image& img, const std::vector<float>& kernel, int ksize);

}  // namespace cinesr::degrade
