#include "cinesr/config.hpp"

#include <fstream>

#include "cinesr/error.hpp"

namespace cinesr::harness {

namespace {

using nlohmann::json;

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T, std::size_t N>
void get_range(const json& j, const char* key, std::array<T, N>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N) raise(ErrorCode::ConfigError, std::string(key) + " must be [lo, hi]");
  for (std::size_t i = 0; i < N; ++i) out[i] = a[i].get<T>();
}

json degradation_to_json(const degrade::DegradationConfig& c) {
  return json{{"mode", c.mode == degrade::DegradationMode::realistic ? "realistic" : "bicubic_only"},
              {"scale", c.scale},
              {"blur_kernel_sizes", c.blur_kernel_sizes},
              {"blur_sigma_range", c.blur_sigma_range},
              {"resize_range", c.resize_range},
              {"noise_sigma_range", c.noise_sigma_range},
              {"jpeg_quality_range", c.jpeg_quality_range},
              {"second_order", c.second_order},
              {"blur_sigma_range2", c.blur_sigma_range2},
              {"resize_range2", c.resize_range2},
              {"noise_sigma_range2", c.noise_sigma_range2},
              {"jpeg_quality_range2", c.jpeg_quality_range2},
              {"blur_prob", c.blur_prob},
              {"resize_prob", c.resize_prob},
              {"noise_prob", c.noise_prob},
              {"jpeg_prob", c.jpeg_prob},
              {"second_blur_prob", c.second_blur_prob},
              {"sinc_prob", c.sinc_prob}};
}

degrade::DegradationConfig degradation_from_json(const json& j) {
  degrade::DegradationConfig c;
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "realistic") {
      c.mode = degrade::DegradationMode::realistic;
    } else if (m == "bicubic_only") {
      c.mode = degrade::DegradationMode::bicubic_only;
    } else {
      raise(ErrorCode::ConfigError, "unknown degradation mode: " + m);
    }
  }
  get_if(j, "scale", c.scale);
  get_if(j, "blur_kernel_sizes", c.blur_kernel_sizes);
  get_range(j, "blur_sigma_range", c.blur_sigma_range);
  get_range(j, "resize_range", c.resize_range);
  get_range(j, "noise_sigma_range", c.noise_sigma_range);
  get_range(j, "jpeg_quality_range", c.jpeg_quality_range);
  get_if(j, "second_order", c.second_order);
  get_range(j, "blur_sigma_range2", c.blur_sigma_range2);
  get_range(j, "resize_range2", c.resize_range2);
  get_range(j, "noise_sigma_range2", c.noise_sigma_range2);
  get_range(j, "jpeg_quality_range2", c.jpeg_quality_range2);
  get_if(j, "blur_prob", c.blur_prob);
  get_if(j, "resize_prob", c.resize_prob);
  get_if(j, "noise_prob", c.noise_prob);
  get_if(j, "jpeg_prob", c.jpeg_prob);
  get_if(j, "second_blur_prob", c.second_blur_prob);
  get_if(j, "sinc_prob", c.sinc_prob);
  return c;
}

}  // namespace

nn::UNetConfig ExperimentConfig::unet_config() const {
  nn::UNetConfig u;
  u.out_channels = 3 * autoencoder.c_latent;
  u.in_channels = 2 * u.out_channels;
  u.base_channels = unet_base_channels;
  u.channel_mult = unet_channel_mult;
  u.temb_dim = unet_temb_dim;
  return u;
}

nlohmann::json ExperimentConfig::to_json() const {
  json j;
  j["profile"] = profile;
  j["data"] = {{"source", data.source},
               {"root", data.root},
               {"train_fraction", data.train_fraction},
               {"phantom_size", data.phantom_size},
               {"phantom_frames", data.phantom_frames},
               {"phantom_train_clips", data.phantom_train_clips},
               {"phantom_eval_clips", data.phantom_eval_clips},
               {"phantom_noise", data.phantom_noise},
               {"phantom_seed", data.phantom_seed}};
  j["window_gap"] = window_gap;
  j["flow"] = {{"pyramid_levels", flow_params.pyramid_levels},
               {"pyramid_scale", flow_params.pyramid_scale},
               {"window_size", flow_params.window_size},
               {"iterations", flow_params.iterations},
               {"poly_n", flow_params.poly_n},
               {"poly_sigma", flow_params.poly_sigma}};
  j["degradation"] = degradation_to_json(degradation);
  j["autoencoder"] = {{"downsample_factor", autoencoder.downsample_factor},
                      {"c_latent", autoencoder.c_latent},
                      {"n_codes", autoencoder.n_codes},
                      {"base_channels", autoencoder.base_channels}};
  j["autoencoder_train"] = {{"iterations", autoencoder_train.iterations},
                            {"batch_size", autoencoder_train.batch_size},
                            {"learning_rate", autoencoder_train.learning_rate},
                            {"commitment_beta", autoencoder_train.commitment_beta},
                            {"target_psnr_db", autoencoder_train.target_psnr_db},
                            {"eval_every", autoencoder_train.eval_every},
                            {"seed", autoencoder_train.seed}};
  j["schedule"] = {{"steps", schedule.steps},
                   {"kappa", schedule.kappa},
                   {"p", schedule.p},
                   {"eta_min", schedule.eta_min},
                   {"eta_max", schedule.eta_max}};
  j["optimizer"] = {{"learning_rate", optimizer.learning_rate},
                    {"batch_size", optimizer.batch_size},
                    {"grad_accum_steps", optimizer.grad_accum_steps},
                    {"total_iterations", optimizer.total_iterations}};
  j["unet"] = {{"base_channels", unet_base_channels},
               {"channel_mult", unet_channel_mult},
               {"temb_dim", unet_temb_dim}};
  j["model_seed"] = model_seed;
  j["train_seed"] = train_seed;
  j["eval_seed"] = eval_seed;
  j["eval_triplets"] = eval_triplets;
  j["output_dir"] = output_dir;
  j["checkpoint_every"] = checkpoint_every;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  get_if(j, "profile", c.profile);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    get_if(d, "source", c.data.source);
    get_if(d, "root", c.data.root);
    get_if(d, "train_fraction", c.data.train_fraction);
    get_if(d, "phantom_size", c.data.phantom_size);
    get_if(d, "phantom_frames", c.data.phantom_frames);
    get_if(d, "phantom_train_clips", c.data.phantom_train_clips);
    get_if(d, "phantom_eval_clips", c.data.phantom_eval_clips);
    get_if(d, "phantom_noise", c.data.phantom_noise);
    get_if(d, "phantom_seed", c.data.phantom_seed);
  }
  get_if(j, "window_gap", c.window_gap);
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    get_if(f, "pyramid_levels", c.flow_params.pyramid_levels);
    get_if(f, "pyramid_scale", c.flow_params.pyramid_scale);
    get_if(f, "window_size", c.flow_params.window_size);
    get_if(f, "iterations", c.flow_params.iterations);
    get_if(f, "poly_n", c.flow_params.poly_n);
    get_if(f, "poly_sigma", c.flow_params.poly_sigma);
  }
  if (j.contains("degradation")) c.degradation = degradation_from_json(j.at("degradation"));
  if (j.contains("autoencoder")) {
    const auto& a = j.at("autoencoder");
    get_if(a, "downsample_factor", c.autoencoder.downsample_factor);
    get_if(a, "c_latent", c.autoencoder.c_latent);
    get_if(a, "n_codes", c.autoencoder.n_codes);
    get_if(a, "base_channels", c.autoencoder.base_channels);
  }
  if (j.contains("autoencoder_train")) {
    const auto& a = j.at("autoencoder_train");
    get_if(a, "iterations", c.autoencoder_train.iterations);
    get_if(a, "batch_size", c.autoencoder_train.batch_size);
    get_if(a, "learning_rate", c.autoencoder_train.learning_rate);
    get_if(a, "commitment_beta", c.autoencoder_train.commitment_beta);
    get_if(a, "target_psnr_db", c.autoencoder_train.target_psnr_db);
    get_if(a, "eval_every", c.autoencoder_train.eval_every);
    get_if(a, "seed", c.autoencoder_train.seed);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    get_if(s, "steps", c.schedule.steps);
    get_if(s, "kappa", c.schedule.kappa);
    get_if(s, "p", c.schedule.p);
    get_if(s, "eta_min", c.schedule.eta_min);
    get_if(s, "eta_max", c.schedule.eta_max);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    get_if(o, "learning_rate", c.optimizer.learning_rate);
    get_if(o, "batch_size", c.optimizer.batch_size);
    get_if(o, "grad_accum_steps", c.optimizer.grad_accum_steps);
    get_if(o, "total_iterations", c.optimizer.total_iterations);
  }
  if (j.contains("unet")) {
    const auto& u = j.at("unet");
    get_if(u, "base_channels", c.unet_base_channels);
    get_if(u, "channel_mult", c.unet_channel_mult);
    get_if(u, "temb_dim", c.unet_temb_dim);
  }
  get_if(j, "model_seed", c.model_seed);
  get_if(j, "train_seed", c.train_seed);
  get_if(j, "eval_seed", c.eval_seed);
  get_if(j, "eval_triplets", c.eval_triplets);
  get_if(j, "output_dir", c.output_dir);
  get_if(j, "checkpoint_every", c.checkpoint_every);
  return c;
}

std::uint64_t ExperimentConfig::config_hash() const {
  const std::string s = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ExperimentConfig::validate() const {
  if (optimizer.batch_size < 1) raise(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (optimizer.grad_accum_steps < 1) raise(ErrorCode::ConfigError, "grad_accum_steps must be >= 1");
  if (optimizer.total_iterations < 1) raise(ErrorCode::ConfigError, "total_iterations must be >= 1");
  if (window_gap < 4) raise(ErrorCode::ConfigError, "window_gap must be >= 4");
  if (eval_triplets < 1) raise(ErrorCode::ConfigError, "eval_triplets must be >= 1");
  if (data.source != "phantom" && data.source != "pgm_tree" && data.source != "dicom") {
    raise(ErrorCode::ConfigError, "unknown data source: " + data.source);
  }
  if (data.source != "phantom") {
    if (data.root.empty()) raise(ErrorCode::ConfigError, "data.root required for " + data.source);
    if (!std::filesystem::exists(data.root)) {
      raise(ErrorCode::ConfigError, "data.root does not exist: " + data.root);
    }
  }
  if (data.source == "phantom") {
    if (data.phantom_size % (autoencoder.downsample_factor * degradation.scale) != 0) {
      raise(ErrorCode::ConfigError, "phantom_size must be divisible by downsample*scale");
    }
  }
  flow_params.validate();
  degradation.validate();
}

ExperimentConfig toy_profile() {
  ExperimentConfig c;
  c.profile = "toy";
  c.data.source = "phantom";
  c.data.phantom_size = 64;
  c.data.phantom_frames = 30;
  c.data.phantom_train_clips = 10;
  c.data.phantom_eval_clips = 4;
  c.data.phantom_noise = 0.01;
  c.autoencoder.base_channels = 16;
  c.autoencoder_train.iterations = 1600;
  c.autoencoder_train.batch_size = 16;
  c.autoencoder_train.learning_rate = 1.5e-3;
  c.autoencoder_train.target_psnr_db = 28.0;
  c.autoencoder_train.eval_every = 200;
  c.optimizer.learning_rate = 2e-4;
  c.optimizer.batch_size = 4;
  c.optimizer.grad_accum_steps = 2;
  c.optimizer.total_iterations = 1500;
  c.unet_base_channels = 40;
  c.eval_triplets = 60;
  c.checkpoint_every = 250;
  c.output_dir = "runs/toy";
  return c;
}

ExperimentConfig fullscale_profile() {
  ExperimentConfig c;
  c.profile = "fullscale";
  c.data.source = "dicom";
  c.data.root = "data/dsb_train";
  c.data.phantom_size = 256;
  c.autoencoder.base_channels = 24;
  c.autoencoder_train.iterations = 20000;
  c.autoencoder_train.batch_size = 8;
  c.autoencoder_train.target_psnr_db = 32.0;
  c.optimizer.learning_rate = 5e-5;
  c.optimizer.batch_size = 44;
  c.optimizer.grad_accum_steps = 4;
  c.optimizer.total_iterations = 25000;
  c.unet_base_channels = 64;
  c.eval_triplets = 200;
  c.checkpoint_every = 1000;
  c.output_dir = "runs/fullscale";
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ConfigError, "cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("bad config json: ") + e.what());
  }
  ExperimentConfig c = ExperimentConfig::from_json(j);
  c.validate();
  return c;
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) raise(ErrorCode::DataUnavailable, "cannot write config: " + path.string());
  out << cfg.to_json().dump(2) << "\n";
}

}  // namespace cinesr::harness
