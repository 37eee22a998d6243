#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cinesr/degrade.hpp"
#include "cinesr/flow.hpp"
#include "cinesr/nn/unet.hpp"
#include "cinesr/vqae.hpp"

namespace cinesr::harness {

struct DataConfig {
  std::string source = "phantom";  // phantom | pgm_tree | dicom
  std::string root;                // dataset root for pgm_tree/dicom
  double train_fraction = 0.8;     // clip split for loaded datasets

  // Phantom generation.
  int phantom_size = 256;
  int phantom_frames = 30;
  int phantom_train_clips = 8;
  int phantom_eval_clips = 4;
  double phantom_noise = 0.01;
  std::uint64_t phantom_seed = 100;
};

struct ScheduleConfig {
  int steps = 15;  // T
  double kappa = 2.0;
  double p = 0.3;
  double eta_min = 0.04;
  double eta_max = 0.999;
};

struct OptimizerConfig {
  double learning_rate = 5e-5;
  int batch_size = 44;  // per accumulation step
  int grad_accum_steps = 4;
  int total_iterations = 25000;
};

struct ExperimentConfig {
  std::string profile = "custom";
  DataConfig data;
  int window_gap = 8;  // K
  flow::FlowParams flow_params;
  degrade::DegradationConfig degradation;
  vqae::VqaeConfig autoencoder;
  vqae::TrainConfig autoencoder_train;
  ScheduleConfig schedule;
  OptimizerConfig optimizer;
  int unet_base_channels = 40;
  int unet_channel_mult = 2;
  int unet_temb_dim = 64;
  std::uint64_t model_seed = 77;
  std::uint64_t train_seed = 1234;
  std::uint64_t eval_seed = 999;
  int eval_triplets = 64;
  std::string output_dir = "runs/exp";
  int checkpoint_every = 250;

  nn::UNetConfig unet_config() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);

  // Canonical content hash used to refuse mismatched resumes.
  std::uint64_t config_hash() const;

  void validate() const;  // raises ConfigError
};

ExperimentConfig toy_profile();
ExperimentConfig fullscale_profile();

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

}  // namespace cinesr::harness
