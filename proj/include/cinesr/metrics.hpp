#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cinesr/image.hpp"
#include "cinesr/nn/tensor.hpp"

namespace cinesr::metrics {

// 10*log10(1/MSE) with peak 1.0; identical inputs return +infinity.
double psnr(const Image& reference, const Image& test);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0, averaged over valid window positions.
double ssim(const Image& reference, const Image& test);

// Feature backbone for the learned perceptual distance: a stack of 3x3
// convolutions with ReLU and 2x average pooling, plus per-channel tap
// weights; loaded from a checkpoint-container weights file.
class LpipsBackbone {
 public:
  struct Stage {
    int in_ch = 0;
    int out_ch = 0;
    int ksize = 3;
    bool pool_before = false;
    bool tap = false;
    nn::Tensorf weight;     // [out_ch, in_ch, k, k]
    nn::Tensorf bias;       // [out_ch]
    nn::Tensorf tap_weight; // [out_ch] when tap
  };

  // Raises BackboneUnavailable when the file is missing or malformed.
  static LpipsBackbone load(const std::filesystem::path& path);

  double distance(const Image& reference, const Image& test) const;

  float input_mean = 0.5f;
  float input_std = 0.5f;
  std::vector<Stage> stages;

 private:
  std::vector<nn::Tensorf> features(const Image& img) const;
};

// Weighted L2 between unit-normalized backbone features.
double lpips(const Image& reference, const Image& test, const LpipsBackbone& backbone);

// Deterministic random-weights backbone, for fixtures and smoke use when no
// externally trained weights file is at hand.
void write_random_backbone(const std::filesystem::path& path, std::uint64_t seed);

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::optional<double> lpips;  // absent without a backbone
  int n_images = 0;
  // aggregation: arithmetic mean over all evaluated frames
};

class MetricAccumulator {
 public:
  void add(double psnr_db, double ssim_value, std::optional<double> lpips_value);
  MetricReport report() const;  // raises ConfigError when empty

 private:
  double psnr_sum_ = 0.0;
  double ssim_sum_ = 0.0;
  double lpips_sum_ = 0.0;
  int n_ = 0;
  int n_lpips_ = 0;
};

std::string format_metric(double v);

}  // namespace cinesr::metrics
