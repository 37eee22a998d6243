#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "cinesr/image.hpp"
#include "cinesr/nn/adam.hpp"
#include "cinesr/nn/checkpoint.hpp"
#include "cinesr/nn/layers.hpp"

namespace cinesr::vqae {

struct Codebook {
  int n_codes = 512;
  int c_latent = 3;
  std::vector<float> entries;  // n_codes * c_latent

  const float* code(int k) const { return entries.data() + static_cast<std::size_t>(k) * c_latent; }
  bool has_duplicates(float tol = 1e-6f) const;
};

struct LatentGrid {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> values;  // h*w*c, channel-last
  bool quantized = false;
  std::vector<int> indices;   // h*w when quantized

  float& at(int y, int x, int ch) { return values[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  float at(int y, int x, int ch) const { return values[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

// Nearest codebook entry per grid vector (Euclidean, ties to the lowest
// index). Identity for already-matching vectors.
LatentGrid quantize(const LatentGrid& latent, const Codebook& codebook);

struct VqaeConfig {
  int downsample_factor = 4;  // two stride-2 stages
  int c_latent = 3;
  int n_codes = 512;
  int base_channels = 24;
};

struct TrainConfig {
  int iterations = 1500;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double commitment_beta = 0.25;
  double target_psnr_db = 0.0;  // early stop when > 0 and reached on validation
  int eval_every = 100;
  std::uint64_t seed = 1;
};

struct TrainStats {
  int iterations_run = 0;
  double final_val_psnr_db = 0.0;
  double initial_quant_error = 0.0;
  double final_quant_error = 0.0;
  std::vector<double> loss_log;
};

// Convolutional encoder (two stride-2 stages) + vector quantizer + mirror
// decoder. The diffusion model consumes the continuous encoder output;
// quantization applies in the decode path only.
class VqAutoencoder {
 public:
  explicit VqAutoencoder(const VqaeConfig& config, std::uint64_t seed = 11);

  const VqaeConfig& config() const { return cfg_; }
  const Codebook& codebook() const { return codebook_; }

  // Spec surface, single frame.
  LatentGrid encode(const Image& frame) const;
  Image decode(const LatentGrid& latent) const;

  // Batched paths used by training and evaluation, NCHW.
  nn::Tensorf encode_batch(const nn::Tensorf& frames) const;
  nn::Tensorf decode_batch(const nn::Tensorf& latents, bool apply_quantization = true) const;

  TrainStats train(const std::vector<Image>& train_frames, const std::vector<Image>& val_frames,
                   const TrainConfig& tc);

  nn::Checkpoint to_checkpoint() const;
  void load_checkpoint(const nn::Checkpoint& ckpt);
  static VqAutoencoder from_checkpoint(const nn::Checkpoint& ckpt);

  std::uint64_t weights_hash() const { return to_checkpoint().weights_hash(); }

  std::vector<nn::Param<float>*> parameters();

 private:
  void quantize_tensor(const nn::Tensorf& z, nn::Tensorf& z_q, std::vector<int>& indices) const;

  VqaeConfig cfg_;
  mutable nn::Sequential<float> encoder_;
  mutable nn::Sequential<float> decoder_;
  Codebook codebook_;
};

double reconstruction_psnr_db(const VqAutoencoder& ae, const std::vector<Image>& frames);

}  // namespace cinesr::vqae
