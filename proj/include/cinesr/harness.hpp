#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cinesr/config.hpp"
#include "cinesr/data_ingest.hpp"
#include "cinesr/diffusion.hpp"
#include "cinesr/metrics.hpp"
#include "cinesr/nn/adam.hpp"
#include "cinesr/nn/unet.hpp"
#include "cinesr/vqae.hpp"

namespace cinesr::harness {

// One degradation-pipeline output pair: temporally interpolated + spatially
// degraded LR triplet against the original ground-truth triplet. The
// metadata regenerates the sample bit-exactly under the same config.
struct TrainingSample {
  std::vector<Image> lr;  // 3 frames at H/scale
  std::vector<Image> gt;  // 3 frames at H
  std::string patient_id;
  std::string slice_id;
  int start_index = 0;
  std::array<int, 3> triplet_offsets{};
  std::uint64_t seed = 0;
};

TrainingSample assemble_training_sample(const data::CineClip& clip, const ExperimentConfig& cfg,
                                        std::uint64_t seed);

struct Dataset {
  std::vector<data::CineClip> train_clips;
  std::vector<data::CineClip> eval_clips;
};

// Phantom generation or scan+load of a pgm_tree/dicom root, split into
// train/eval clips.
Dataset load_dataset(const ExperimentConfig& cfg);

// Writes a phantom dataset as a pgm_tree (16-bit PGM frames).
void write_phantom_dataset(const ExperimentConfig& cfg, const std::filesystem::path& root);

// Latent stack helpers: three frames <-> [1, 3*c_latent, h, w], channels
// frame-major.
nn::Tensorf encode_triplet(const vqae::VqAutoencoder& ae, const std::vector<Image>& frames);
nn::Tensorf encode_lr_triplet(const vqae::VqAutoencoder& ae, const std::vector<Image>& lr, int scale);
std::vector<Image> decode_triplet(const vqae::VqAutoencoder& ae, const nn::Tensorf& latents);

struct TrainOutcome {
  std::filesystem::path autoencoder_ckpt;
  std::filesystem::path diffusion_ckpt;
  std::filesystem::path loss_log;
  double autoencoder_val_psnr_db = 0.0;
  int start_iteration = 0;  // first iteration executed by this call
  int end_iteration = 0;    // one past the last executed iteration
  std::vector<double> loss_history;  // losses for [start_iteration, end_iteration)
};

// Stage 1: autoencoder pre-training (skipped when a checkpoint exists).
// Stage 2: diffusion training with gradient accumulation, periodic
// checkpoints, and a loss log; resumable.
TrainOutcome run_training(const ExperimentConfig& cfg);

// Bundles the frozen autoencoder and trained denoiser loaded from a run
// directory.
struct TrainedModel {
  vqae::VqAutoencoder autoencoder;
  std::unique_ptr<nn::UNet<float>> unet;
  diffusion::Schedule schedule;
};

TrainedModel load_trained_model(const ExperimentConfig& cfg);

// Model abstraction for evaluation. x0_true is supplied so oracle fixtures
// can be scored through the same path; real models must ignore it.
struct EvalModel {
  virtual ~EvalModel() = default;
  virtual nn::Tensorf predict_x0(const nn::Tensorf& y, const nn::Tensorf& cond,
                                 const nn::Tensorf& x0_true, std::uint64_t seed) const = 0;
};

class DiffusionEvalModel : public EvalModel {
 public:
  DiffusionEvalModel(nn::UNet<float>& unet, diffusion::Schedule schedule)
      : unet_(unet), schedule_(std::move(schedule)) {}
  nn::Tensorf predict_x0(const nn::Tensorf& y, const nn::Tensorf& cond, const nn::Tensorf& x0_true,
                         std::uint64_t seed) const override;

 private:
  nn::UNet<float>& unet_;
  diffusion::Schedule schedule_;
};

struct EvalReport {
  metrics::MetricReport baseline;
  metrics::MetricReport model;
  double baseline_feat_l1 = 0.0;  // L1 in autoencoder latent space
  double model_feat_l1 = 0.0;
  std::string mode;
  int n_triplets = 0;

  std::string table() const;       // Table-1-shaped rows x metric columns
  std::string key_values() const;  // line-oriented key=value form
};

std::vector<TrainingSample> make_eval_samples(const ExperimentConfig& cfg,
                                              const std::vector<data::CineClip>& clips);

EvalReport run_evaluation(const ExperimentConfig& cfg, const vqae::VqAutoencoder& ae,
                          const EvalModel& model, const std::vector<TrainingSample>& samples,
                          const metrics::LpipsBackbone* backbone = nullptr);

// Baseline metrics only; requires no trained model or autoencoder.
metrics::MetricReport run_baseline(const ExperimentConfig& cfg,
                                   const std::vector<TrainingSample>& samples,
                                   const metrics::LpipsBackbone* backbone = nullptr);

struct InferenceResult {
  TrainingSample sample;             // the window the clip was sampled at
  std::vector<Image> frames;         // 3 super-resolved frames
  std::vector<std::filesystem::path> trajectory_files;
};

// Super-resolves one sampled triplet of the clip; optionally decodes and
// dumps the reverse-diffusion states at 5 normalized times.
InferenceResult run_inference(const ExperimentConfig& cfg, const vqae::VqAutoencoder& ae,
                              nn::UNet<float>& unet, const diffusion::Schedule& schedule,
                              const data::CineClip& clip, std::uint64_t seed,
                              const std::filesystem::path* dump_dir);

}  // namespace cinesr::harness
