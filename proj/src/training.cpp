#include <fstream>
#include <iostream>
#include <sstream>

#include "cinesr/error.hpp"
#include "cinesr/harness.hpp"

namespace fs = std::filesystem;

namespace cinesr::harness {

namespace {

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

struct DiffusionCheckpointIo {
  static void save(const fs::path& path, nn::UNet<float>& unet, nn::Adam<float>& opt, int iteration,
                   const ExperimentConfig& cfg, std::uint64_t ae_hash) {
    nn::Checkpoint ckpt;
    ckpt.header["kind"] = "latent_diffusion";
    ckpt.header["iteration"] = iteration;
    ckpt.header["config_hash"] = hash_hex(cfg.config_hash());
    ckpt.header["autoencoder_hash"] = hash_hex(ae_hash);
    ckpt.header["adam_step"] = opt.step_count();
    ckpt.header["unet"] = {{"base_channels", unet.config().base_channels},
                           {"channel_mult", unet.config().channel_mult},
                           {"temb_dim", unet.config().temb_dim},
                           {"in_channels", unet.config().in_channels},
                           {"out_channels", unet.config().out_channels}};
    auto params = unet.parameters();
    for (auto* p : params) ckpt.add(p->name, p->value);
    auto& m = opt.moment1();
    auto& v = opt.moment2();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ckpt.add("adam.m." + std::to_string(i), m[i]);
      ckpt.add("adam.v." + std::to_string(i), v[i]);
    }
    ckpt.save(path);
  }

  // Returns the iteration to resume from.
  static int load(const fs::path& path, nn::UNet<float>& unet, nn::Adam<float>& opt,
                  const ExperimentConfig& cfg) {
    const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
    if (ckpt.header.value("kind", "") != "latent_diffusion") {
      raise(ErrorCode::CheckpointMismatch, "not a diffusion checkpoint: " + path.string());
    }
    if (ckpt.header.value("config_hash", "") != hash_hex(cfg.config_hash())) {
      raise(ErrorCode::CheckpointMismatch,
            "checkpoint was written under a different config; resumption refused");
    }
    auto params = unet.parameters();
    for (auto* p : params) p->value = ckpt.require(p->name, p->value.shape);
    auto& m = opt.moment1();
    auto& v = opt.moment2();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = ckpt.require("adam.m." + std::to_string(i), m[i].shape);
      v[i] = ckpt.require("adam.v." + std::to_string(i), v[i].shape);
    }
    opt.set_step_count(ckpt.header.value("adam_step", 0L));
    return ckpt.header.value("iteration", 0);
  }
};

std::vector<Image> collect_frames(const std::vector<data::CineClip>& clips, std::size_t stride = 1) {
  std::vector<Image> frames;
  for (const auto& clip : clips) {
    for (std::size_t i = 0; i < clip.frames.size(); i += stride) frames.push_back(clip.frames[i]);
  }
  return frames;
}

// Rewrites the loss log so it ends at `last_iteration`, preserving comments.
void trim_loss_log(const fs::path& path, int last_iteration) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      keep.push_back(line);
      continue;
    }
    std::istringstream ls(line);
    int iter = -1;
    ls >> iter;
    if (ls && iter < last_iteration) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

}  // namespace

TrainOutcome run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path run_dir = cfg.output_dir;
  const fs::path ckpt_dir = run_dir / "checkpoints";
  const fs::path log_dir = run_dir / "logs";
  fs::create_directories(ckpt_dir);
  fs::create_directories(log_dir);

  TrainOutcome outcome;
  outcome.autoencoder_ckpt = ckpt_dir / "vqae.ckpt";
  outcome.diffusion_ckpt = ckpt_dir / "diffusion.ckpt";
  outcome.loss_log = log_dir / "train_loss.txt";

  const Dataset ds = load_dataset(cfg);

  // Stage 1: autoencoder pre-training, skipped when a checkpoint exists.
  vqae::VqAutoencoder ae(cfg.autoencoder, Rng::mix(cfg.model_seed, 1));
  if (fs::exists(outcome.autoencoder_ckpt)) {
    ae = vqae::VqAutoencoder::from_checkpoint(nn::Checkpoint::load(outcome.autoencoder_ckpt));
    outcome.autoencoder_val_psnr_db =
        vqae::reconstruction_psnr_db(ae, collect_frames(ds.eval_clips, 5));
  } else {
    const std::vector<Image> train_frames = collect_frames(ds.train_clips);
    const std::vector<Image> val_frames = collect_frames(ds.eval_clips, 5);
    const vqae::TrainStats stats = ae.train(train_frames, val_frames, cfg.autoencoder_train);
    outcome.autoencoder_val_psnr_db = stats.final_val_psnr_db;
    ae.to_checkpoint().save(outcome.autoencoder_ckpt);
  }
  const std::uint64_t ae_hash = ae.weights_hash();

  // Stage 2: denoiser training over frozen-autoencoder latents.
  const diffusion::Schedule schedule = diffusion::build_schedule(
      cfg.schedule.steps, cfg.schedule.kappa, cfg.schedule.p, cfg.schedule.eta_min, cfg.schedule.eta_max);

  nn::UNet<float> unet(cfg.unet_config(), Rng::mix(cfg.model_seed, 2));
  nn::Adam<float> opt(unet.parameters(), cfg.optimizer.learning_rate);

  int start_iter = 0;
  if (fs::exists(outcome.diffusion_ckpt)) {
    start_iter = DiffusionCheckpointIo::load(outcome.diffusion_ckpt, unet, opt, cfg);
  }
  outcome.start_iteration = start_iter;
  trim_loss_log(outcome.loss_log, start_iter);

  std::ofstream log(outcome.loss_log, std::ios::app);
  if (!log) raise(ErrorCode::DataUnavailable, "cannot open loss log");
  if (start_iter == 0) {
    log << "# effective_batch=" << cfg.optimizer.batch_size * cfg.optimizer.grad_accum_steps
        << " batch_size=" << cfg.optimizer.batch_size
        << " grad_accum_steps=" << cfg.optimizer.grad_accum_steps
        << " learning_rate=" << cfg.optimizer.learning_rate << "\n";
  }

  const int micro = cfg.optimizer.batch_size;
  const int accum = cfg.optimizer.grad_accum_steps;
  const float grad_scale = 1.f / static_cast<float>(micro * accum);
  const int n_train = static_cast<int>(ds.train_clips.size());

  for (int iter = start_iter; iter < cfg.optimizer.total_iterations; ++iter) {
    opt.zero_grad();
    double loss_sum = 0.0;
    for (int a = 0; a < accum; ++a) {
      for (int b = 0; b < micro; ++b) {
        const std::uint64_t counter =
            (static_cast<std::uint64_t>(iter) * accum + static_cast<std::uint64_t>(a)) * micro +
            static_cast<std::uint64_t>(b);
        Rng rng(Rng::mix(cfg.train_seed, counter));
        const data::CineClip& clip =
            ds.train_clips[static_cast<std::size_t>(rng.uniform_int(0, n_train - 1))];
        const TrainingSample s = assemble_training_sample(clip, cfg, rng.next_u64());

        const nn::Tensorf x0 = encode_triplet(ae, s.gt);
        const nn::Tensorf cond = encode_lr_triplet(ae, s.lr, cfg.degradation.scale);
        const int t = static_cast<int>(rng.uniform_int(1, schedule.T));
        const nn::Tensorf noise = diffusion::randn_like(x0, rng);

        nn::Tensorf dpred;
        const diffusion::DenoiserFn<float> f = [&unet](const nn::Tensorf& x_t, const nn::Tensorf& c,
                                                       int tt) { return unet.forward(x_t, c, tt); };
        const float loss = diffusion::training_loss<float>(f, x0, cond, cond, t, schedule, noise, &dpred);
        loss_sum += loss;
        for (auto& g : dpred.data) g *= grad_scale;
        unet.backward(dpred);
      }
    }
    opt.step();

    const double mean_loss = loss_sum / static_cast<double>(micro * accum);
    outcome.loss_history.push_back(mean_loss);
    log << iter << " " << mean_loss << " " << opt.lr() << "\n";
    log.flush();

    const bool last = iter + 1 == cfg.optimizer.total_iterations;
    if ((iter + 1) % cfg.checkpoint_every == 0 || last) {
      if (ae.weights_hash() != ae_hash) {
        raise(ErrorCode::CheckpointMismatch, "autoencoder weights changed during diffusion training");
      }
      DiffusionCheckpointIo::save(outcome.diffusion_ckpt, unet, opt, iter + 1, cfg, ae_hash);
    }
    outcome.end_iteration = iter + 1;
  }
  return outcome;
}

TrainedModel load_trained_model(const ExperimentConfig& cfg) {
  const fs::path ckpt_dir = fs::path(cfg.output_dir) / "checkpoints";
  const fs::path ae_path = ckpt_dir / "vqae.ckpt";
  const fs::path diff_path = ckpt_dir / "diffusion.ckpt";
  if (!fs::exists(ae_path) || !fs::exists(diff_path)) {
    raise(ErrorCode::CheckpointMismatch, "run directory has no trained checkpoints: " + cfg.output_dir);
  }
  TrainedModel model{vqae::VqAutoencoder::from_checkpoint(nn::Checkpoint::load(ae_path)), nullptr,
                     diffusion::build_schedule(cfg.schedule.steps, cfg.schedule.kappa, cfg.schedule.p,
                                               cfg.schedule.eta_min, cfg.schedule.eta_max)};

  const nn::Checkpoint ckpt = nn::Checkpoint::load(diff_path);
  if (ckpt.header.value("kind", "") != "latent_diffusion") {
    raise(ErrorCode::CheckpointMismatch, "not a diffusion checkpoint: " + diff_path.string());
  }
  model.unet = std::make_unique<nn::UNet<float>>(cfg.unet_config(), Rng::mix(cfg.model_seed, 2));
  for (auto* p : model.unet->parameters()) p->value = ckpt.require(p->name, p->value.shape);
  return model;
}

}  // namespace cinesr::harness
