#include "cinesr/harness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cinesr/error.hpp"
#include "cinesr/pgm.hpp"

namespace fs = std::filesystem;

namespace cinesr::harness {

TrainingSample assemble_training_sample(const data::CineClip& clip, const ExperimentConfig& cfg,
                                        std::uint64_t seed) {
  const flow::TrainingWindow win =
      flow::sample_training_window(clip, cfg.window_gap, seed, cfg.flow_params);

  std::vector<Image> picked;
  for (int offset : win.triplet_offsets) {
    picked.push_back(win.interpolated[static_cast<std::size_t>(offset - 1)]);
  }

  TrainingSample sample;
  sample.patient_id = clip.patient_id;
  sample.slice_id = clip.slice_id;
  sample.start_index = win.start_index;
  sample.triplet_offsets = win.triplet_offsets;
  sample.seed = seed;
  sample.gt = win.gt_frames;
  if (cfg.degradation.mode == degrade::DegradationMode::bicubic_only) {
    sample.lr = degrade::degrade_bicubic(picked, cfg.degradation.scale);
  } else {
    sample.lr = degrade::degrade_realistic(picked, cfg.degradation, Rng::mix(seed, 0xdecade));
  }
  return sample;
}

namespace {

data::PhantomConfig phantom_config_for(const ExperimentConfig& cfg, int clip_index) {
  Rng rng(Rng::mix(cfg.data.phantom_seed, static_cast<std::uint64_t>(clip_index) * 2 + 1));
  data::PhantomConfig pc;
  pc.size = cfg.data.phantom_size;
  pc.period = static_cast<int>(rng.uniform_int(24, 34));
  pc.base_radius = cfg.data.phantom_size * rng.uniform(0.22, 0.34);
  pc.contraction_amplitude = rng.uniform(0.22, 0.4);
  pc.noise_level = cfg.data.phantom_noise;
  pc.texture_seed = Rng::mix(cfg.data.phantom_seed, 1000 + static_cast<std::uint64_t>(clip_index));
  return pc;
}

data::CineClip make_phantom_clip(const ExperimentConfig& cfg, int clip_index) {
  const data::PhantomConfig pc = phantom_config_for(cfg, clip_index);
  data::CineClip clip = data::synth_phantom_clip(
      pc, cfg.data.phantom_frames, Rng::mix(cfg.data.phantom_seed, 2000 + static_cast<std::uint64_t>(clip_index)));
  clip.patient_id = "phantom_" + std::to_string(clip_index);
  clip.slice_id = "0";
  return clip;
}

}  // namespace

Dataset load_dataset(const ExperimentConfig& cfg) {
  Dataset ds;
  if (cfg.data.source == "phantom") {
    for (int i = 0; i < cfg.data.phantom_train_clips; ++i) {
      ds.train_clips.push_back(make_phantom_clip(cfg, i));
    }
    // Held-out clips use a disjoint index range, i.e. unseen geometry and
    // texture.
    for (int i = 0; i < cfg.data.phantom_eval_clips; ++i) {
      ds.eval_clips.push_back(make_phantom_clip(cfg, 10000 + i));
    }
    return ds;
  }

  const data::DatasetFormat format =
      cfg.data.source == "dicom" ? data::DatasetFormat::dicom : data::DatasetFormat::pgm_tree;
  const data::PatientIndex index = data::scan_dataset(cfg.data.root, format);
  if (index.entries.empty()) raise(ErrorCode::DataUnavailable, "no series under " + cfg.data.root);
  std::vector<data::CineClip> clips;
  for (const auto& rec : index.entries) {
    clips.push_back(data::load_cine_clip(index, rec.patient_id, rec.slice_id));
  }
  const std::size_t n_train = static_cast<std::size_t>(
      std::max<double>(1.0, std::floor(cfg.data.train_fraction * static_cast<double>(clips.size()))));
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (i < n_train) {
      ds.train_clips.push_back(std::move(clips[i]));
    } else {
      ds.eval_clips.push_back(std::move(clips[i]));
    }
  }
  if (ds.eval_clips.empty()) {
    // Tiny datasets: reuse the last training clip for evaluation.
    ds.eval_clips.push_back(ds.train_clips.back());
  }
  return ds;
}

void write_phantom_dataset(const ExperimentConfig& cfg, const fs::path& root) {
  const int total = cfg.data.phantom_train_clips + cfg.data.phantom_eval_clips;
  for (int i = 0; i < total; ++i) {
    const int index = i < cfg.data.phantom_train_clips ? i : 10000 + (i - cfg.data.phantom_train_clips);
    const data::CineClip clip = make_phantom_clip(cfg, index);
    const fs::path dir = root / ("patient_" + std::to_string(index)) / "slice_0";
    fs::create_directories(dir);
    for (int t = 0; t < clip.frame_count(); ++t) {
      write_pgm(dir / ("frame_" + std::to_string(t) + ".pgm"), clip.frames[static_cast<std::size_t>(t)],
                65535);
    }
  }
}

nn::Tensorf encode_triplet(const vqae::VqAutoencoder& ae, const std::vector<Image>& frames) {
  const int n = static_cast<int>(frames.size());
  const int h = frames[0].h, w = frames[0].w;
  nn::Tensorf batch({n, 1, h, w});
  for (int i = 0; i < n; ++i) {
    std::copy(frames[static_cast<std::size_t>(i)].v.begin(), frames[static_cast<std::size_t>(i)].v.end(),
              batch.ptr() + static_cast<std::int64_t>(i) * h * w);
  }
  const nn::Tensorf z = ae.encode_batch(batch);  // [n, cl, h/4, w/4]
  const int cl = z.dim(1), lh = z.dim(2), lw = z.dim(3);
  nn::Tensorf stack({1, n * cl, lh, lw});
  std::copy(z.data.begin(), z.data.end(), stack.data.begin());
  return stack;
}

nn::Tensorf encode_lr_triplet(const vqae::VqAutoencoder& ae, const std::vector<Image>& lr, int scale) {
  std::vector<Image> up;
  up.reserve(lr.size());
  for (const auto& f : lr) {
    up.push_back(degrade::bicubic_resize(f, static_cast<double>(scale)));
  }
  return encode_triplet(ae, up);
}

std::vector<Image> decode_triplet(const vqae::VqAutoencoder& ae, const nn::Tensorf& latents) {
  const int cl = ae.config().c_latent;
  const int n = latents.dim(1) / cl, lh = latents.dim(2), lw = latents.dim(3);
  nn::Tensorf grouped({n, cl, lh, lw});
  std::copy(latents.data.begin(), latents.data.end(), grouped.data.begin());
  const nn::Tensorf out = ae.decode_batch(grouped);  // [n, 1, H, W]
  std::vector<Image> frames;
  frames.reserve(static_cast<std::size_t>(n));
  const int h = out.dim(2), w = out.dim(3);
  for (int i = 0; i < n; ++i) {
    Image img(h, w);
    std::copy_n(out.ptr() + static_cast<std::int64_t>(i) * h * w, static_cast<std::int64_t>(h) * w,
                img.v.begin());
    frames.push_back(std::move(img));
  }
  return frames;
}

nn::Tensorf DiffusionEvalModel::predict_x0(const nn::Tensorf& y, const nn::Tensorf& cond,
                                           const nn::Tensorf& x0_true, std::uint64_t seed) const {
  (void)x0_true;
  const diffusion::DenoiserFn<float> f = [this](const nn::Tensorf& x_t, const nn::Tensorf& c, int t) {
    return unet_.forward(x_t, c, t);
  };
  return diffusion::sample<float>(f, y, cond, schedule_, seed).x0;
}

std::vector<TrainingSample> make_eval_samples(const ExperimentConfig& cfg,
                                              const std::vector<data::CineClip>& clips) {
  if (clips.empty()) raise(ErrorCode::DataUnavailable, "no evaluation clips");
  std::vector<TrainingSample> samples;
  samples.reserve(static_cast<std::size_t>(cfg.eval_triplets));
  for (int i = 0; i < cfg.eval_triplets; ++i) {
    const data::CineClip& clip = clips[static_cast<std::size_t>(i) % clips.size()];
    samples.push_back(assemble_training_sample(clip, cfg, Rng::mix(cfg.eval_seed, static_cast<std::uint64_t>(i))));
  }
  return samples;
}

namespace {

double triplet_feat_l1(const nn::Tensorf& a, const nn::Tensorf& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    s += std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
  }
  return s / static_cast<double>(a.data.size());
}

std::optional<double> maybe_lpips(const metrics::LpipsBackbone* backbone, const Image& ref,
                                  const Image& test) {
  if (!backbone) return std::nullopt;
  return metrics::lpips(ref, test, *backbone);
}

}  // namespace

metrics::MetricReport run_baseline(const ExperimentConfig& cfg, const std::vector<TrainingSample>& samples,
                                   const metrics::LpipsBackbone* backbone) {
  if (samples.empty()) raise(ErrorCode::ConfigError, "empty evaluation set");
  metrics::MetricAccumulator acc;
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < s.gt.size(); ++k) {
      const Image up = degrade::bicubic_resize(s.lr[k], static_cast<double>(cfg.degradation.scale));
      acc.add(metrics::psnr(s.gt[k], up), metrics::ssim(s.gt[k], up), maybe_lpips(backbone, s.gt[k], up));
    }
  }
  return acc.report();
}

EvalReport run_evaluation(const ExperimentConfig& cfg, const vqae::VqAutoencoder& ae,
                          const EvalModel& model, const std::vector<TrainingSample>& samples,
                          const metrics::LpipsBackbone* backbone) {
  if (samples.empty()) raise(ErrorCode::ConfigError, "empty evaluation set");
  metrics::MetricAccumulator base_acc, model_acc;
  double base_feat = 0.0, model_feat = 0.0;

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const TrainingSample& s = samples[i];

    std::vector<Image> base_frames;
    for (const auto& lr : s.lr) {
      base_frames.push_back(degrade::bicubic_resize(lr, static_cast<double>(cfg.degradation.scale)));
    }

    const nn::Tensorf cond = encode_lr_triplet(ae, s.lr, cfg.degradation.scale);
    const nn::Tensorf x0_true = encode_triplet(ae, s.gt);
    const nn::Tensorf pred =
        model.predict_x0(cond, cond, x0_true, Rng::mix(cfg.eval_seed, 50000 + static_cast<std::uint64_t>(i)));
    const std::vector<Image> out_frames = decode_triplet(ae, pred);

    for (std::size_t k = 0; k < s.gt.size(); ++k) {
      base_acc.add(metrics::psnr(s.gt[k], base_frames[k]), metrics::ssim(s.gt[k], base_frames[k]),
                   maybe_lpips(backbone, s.gt[k], base_frames[k]));
      model_acc.add(metrics::psnr(s.gt[k], out_frames[k]), metrics::ssim(s.gt[k], out_frames[k]),
                    maybe_lpips(backbone, s.gt[k], out_frames[k]));
    }
    base_feat += triplet_feat_l1(encode_triplet(ae, base_frames), x0_true);
    model_feat += triplet_feat_l1(encode_triplet(ae, out_frames), x0_true);
  }

  EvalReport report;
  report.baseline = base_acc.report();
  report.model = model_acc.report();
  report.baseline_feat_l1 = base_feat / static_cast<double>(samples.size());
  report.model_feat_l1 = model_feat / static_cast<double>(samples.size());
  report.mode = cfg.degradation.mode == degrade::DegradationMode::realistic ? "realistic" : "bicubic_only";
  report.n_triplets = static_cast<int>(samples.size());
  return report;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << "# " << "4x spatial, 8x temporal  (mode: " << mode << ", triplets: " << n_triplets << ")\n";
  os << "Models    PSNR      SSIM      LPIPS     FeatL1\n";
  auto row = [&os](const char* name, const metrics::MetricReport& r, double feat) {
    os << name << "  " << metrics::format_metric(r.psnr_db) << "   " << metrics::format_metric(r.ssim)
       << "    " << (r.lpips ? metrics::format_metric(*r.lpips) : std::string("absent")) << "    "
       << metrics::format_metric(feat) << "\n";
  };
  row("Baseline", baseline, baseline_feat_l1);
  row("LDM     ", model, model_feat_l1);
  return os.str();
}

std::string EvalReport::key_values() const {
  std::ostringstream os;
  os << "mode=" << mode << "\n";
  os << "n_triplets=" << n_triplets << "\n";
  auto block = [&os](const char* name, const metrics::MetricReport& r, double feat) {
    os << name << ".psnr_db=" << metrics::format_metric(r.psnr_db) << "\n";
    os << name << ".ssim=" << metrics::format_metric(r.ssim) << "\n";
    os << name << ".lpips=" << (r.lpips ? metrics::format_metric(*r.lpips) : std::string("absent")) << "\n";
    os << name << ".feat_l1=" << metrics::format_metric(feat) << "\n";
    os << name << ".n_images=" << r.n_images << "\n";
  };
  block("baseline", baseline, baseline_feat_l1);
  block("ldm", model, model_feat_l1);
  return os.str();
}

InferenceResult run_inference(const ExperimentConfig& cfg, const vqae::VqAutoencoder& ae,
                              nn::UNet<float>& unet, const diffusion::Schedule& schedule,
                              const data::CineClip& clip, std::uint64_t seed,
                              const fs::path* dump_dir) {
  InferenceResult result;
  result.sample = assemble_training_sample(clip, cfg, seed);

  const nn::Tensorf cond = encode_lr_triplet(ae, result.sample.lr, cfg.degradation.scale);
  const diffusion::DenoiserFn<float> f = [&unet](const nn::Tensorf& x_t, const nn::Tensorf& c, int t) {
    return unet.forward(x_t, c, t);
  };
  diffusion::SampleOptions opts;
  opts.record_trajectory = dump_dir != nullptr;
  const auto sampled = diffusion::sample<float>(f, cond, cond, schedule, Rng::mix(seed, 0x1f), opts);
  result.frames = decode_triplet(ae, sampled.x0);

  if (dump_dir) {
    fs::create_directories(*dump_dir);
    for (std::size_t i = 0; i < sampled.trajectory.size(); ++i) {
      const std::vector<Image> frames = decode_triplet(ae, sampled.trajectory[i]);
      // One grid per snapshot: the triplet side by side.
      const int h = frames[0].h, w = frames[0].w;
      Image grid(h, w * static_cast<int>(frames.size()));
      for (std::size_t k = 0; k < frames.size(); ++k) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            grid.at(y, static_cast<int>(k) * w + x) = frames[k].at(y, x);
          }
        }
      }
      const fs::path file = *dump_dir / ("trajectory_" + std::to_string(i) + ".pgm");
      write_pgm(file, grid, 255);
      result.trajectory_files.push_back(file);
    }
  }
  return result;
}

}  // namespace cinesr::harness
