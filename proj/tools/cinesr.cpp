#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "cinesr/error.hpp"
#include "cinesr/harness.hpp"
#include "cinesr/pgm.hpp"

namespace fs = std::filesystem;
using namespace cinesr;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::string profile;
  std::string output_dir;

  void attach(CLI::App* cmd) {
    auto* c = cmd->add_option("--config", config_path, "experiment config file (json)");
    auto* p = cmd->add_option("--profile", profile, "built-in profile: toy or fullscale");
    cmd->add_option("--output-dir", output_dir, "override the run directory");
    c->excludes(p);
  }

  harness::ExperimentConfig resolve() const {
    harness::ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = harness::load_config(config_path);
    } else if (profile == "toy") {
      cfg = harness::toy_profile();
    } else if (profile == "fullscale") {
      cfg = harness::fullscale_profile();
    } else if (profile.empty()) {
      raise(ErrorCode::ConfigError, "pass --config FILE or --profile toy|fullscale");
    } else {
      raise(ErrorCode::ConfigError, "unknown profile: " + profile);
    }
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.validate();
    return cfg;
  }
};

const data::CineClip* find_clip(const harness::Dataset& ds, const std::string& patient,
                                const std::string& slice) {
  for (const auto& c : ds.eval_clips) {
    if (c.patient_id == patient && c.slice_id == slice) return &c;
  }
  for (const auto& c : ds.train_clips) {
    if (c.patient_id == patient && c.slice_id == slice) return &c;
  }
  return nullptr;
}

void write_report(const harness::ExperimentConfig& cfg, const std::string& name,
                  const std::string& content) {
  const fs::path dir = fs::path(cfg.output_dir) / "reports";
  fs::create_directories(dir);
  std::ofstream out(dir / name);
  out << content;
  std::cout << "wrote " << (dir / name).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint temporal (x8) and spatial (x4) super-resolution for cine MRI"};
  app.require_subcommand(1);

  // scan
  auto* scan_cmd = app.add_subcommand("scan", "index a dataset tree");
  std::string scan_root, scan_format = "pgm_tree", scan_log_path;
  scan_cmd->add_option("--root", scan_root, "dataset root")->required();
  scan_cmd->add_option("--format", scan_format, "dicom or pgm_tree");
  scan_cmd->add_option("--log", scan_log_path, "scan log file");

  // synth-data
  auto* synth_cmd = app.add_subcommand("synth-data", "write a phantom dataset as a pgm tree");
  ConfigArgs synth_cfg;
  synth_cfg.attach(synth_cmd);
  std::string synth_out;
  synth_cmd->add_option("--out", synth_out, "output root")->required();

  // train-autoencoder
  auto* tae_cmd = app.add_subcommand("train-autoencoder", "stage 1: pre-train the autoencoder");
  ConfigArgs tae_cfg;
  tae_cfg.attach(tae_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "stage 1 (if needed) + stage 2 diffusion training");
  ConfigArgs train_cfg;
  train_cfg.attach(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score baseline and model on the eval split");
  ConfigArgs eval_cfg;
  eval_cfg.attach(eval_cmd);
  std::string lpips_path;
  eval_cmd->add_option("--lpips-backbone", lpips_path, "LPIPS backbone weights file");

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "score the bicubic baseline only (no model)");
  ConfigArgs base_cfg;
  base_cfg.attach(base_cmd);
  std::string base_lpips_path;
  base_cmd->add_option("--lpips-backbone", base_lpips_path, "LPIPS backbone weights file");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "super-resolve one sampled triplet of a clip");
  ConfigArgs infer_cfg;
  infer_cfg.attach(infer_cmd);
  std::string infer_patient, infer_slice;
  std::uint64_t infer_seed = 7;
  bool dump_trajectory = false;
  std::string infer_out = "";
  infer_cmd->add_option("--patient", infer_patient, "patient id (default: first eval clip)");
  infer_cmd->add_option("--slice", infer_slice, "slice id");
  infer_cmd->add_option("--seed", infer_seed, "window/sampler seed");
  infer_cmd->add_flag("--dump-trajectory", dump_trajectory, "dump 5 reverse-diffusion snapshots");
  infer_cmd->add_option("--out", infer_out, "output directory (default: <run>/dumps)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scan_cmd) {
      const data::DatasetFormat fmt = scan_format == "dicom" ? data::DatasetFormat::dicom
                                                             : data::DatasetFormat::pgm_tree;
      std::ofstream log_file;
      std::ostream* log = &std::cerr;
      if (!scan_log_path.empty()) {
        log_file.open(scan_log_path);
        log = &log_file;
      }
      const data::PatientIndex index = data::scan_dataset(scan_root, fmt, log);
      std::cout << "series: " << index.entries.size() << "\npatients: " << index.patient_count() << "\n";
      for (const auto& rec : index.entries) {
        std::cout << rec.patient_id << "/" << rec.slice_id << " frames=" << rec.frame_count << "\n";
      }
    } else if (*synth_cmd) {
      const auto cfg = synth_cfg.resolve();
      harness::write_phantom_dataset(cfg, synth_out);
      std::cout << "wrote phantom dataset under " << synth_out << "\n";
    } else if (*tae_cmd) {
      auto cfg = tae_cfg.resolve();
      const harness::Dataset ds = harness::load_dataset(cfg);
      vqae::VqAutoencoder ae(cfg.autoencoder, Rng::mix(cfg.model_seed, 1));
      std::vector<Image> train_frames, val_frames;
      for (const auto& c : ds.train_clips) {
        train_frames.insert(train_frames.end(), c.frames.begin(), c.frames.end());
      }
      for (const auto& c : ds.eval_clips) {
        for (std::size_t i = 0; i < c.frames.size(); i += 5) val_frames.push_back(c.frames[i]);
      }
      const auto stats = ae.train(train_frames, val_frames, cfg.autoencoder_train);
      const fs::path out = fs::path(cfg.output_dir) / "checkpoints" / "vqae.ckpt";
      ae.to_checkpoint().save(out);
      std::cout << "autoencoder: " << stats.iterations_run << " iterations, validation PSNR "
                << metrics::format_metric(stats.final_val_psnr_db) << " dB\nwrote " << out.string() << "\n";
    } else if (*train_cmd) {
      const auto cfg = train_cfg.resolve();
      const auto outcome = harness::run_training(cfg);
      std::cout << "autoencoder validation PSNR: "
                << metrics::format_metric(outcome.autoencoder_val_psnr_db) << " dB\n";
      std::cout << "diffusion iterations: [" << outcome.start_iteration << ", " << outcome.end_iteration
                << ")\ncheckpoint: " << outcome.diffusion_ckpt.string()
                << "\nloss log: " << outcome.loss_log.string() << "\n";
    } else if (*eval_cmd) {
      const auto cfg = eval_cfg.resolve();
      const harness::Dataset ds = harness::load_dataset(cfg);
      harness::TrainedModel model = harness::load_trained_model(cfg);
      std::unique_ptr<metrics::LpipsBackbone> backbone;
      if (!lpips_path.empty()) {
        backbone = std::make_unique<metrics::LpipsBackbone>(metrics::LpipsBackbone::load(lpips_path));
      }
      const auto samples = harness::make_eval_samples(cfg, ds.eval_clips);
      const harness::DiffusionEvalModel eval_model(*model.unet, model.schedule);
      const auto report =
          harness::run_evaluation(cfg, model.autoencoder, eval_model, samples, backbone.get());
      std::cout << report.table();
      write_report(cfg, "eval.txt", report.table() + "\n" + report.key_values());
    } else if (*base_cmd) {
      const auto cfg = base_cfg.resolve();
      const harness::Dataset ds = harness::load_dataset(cfg);
      std::unique_ptr<metrics::LpipsBackbone> backbone;
      if (!base_lpips_path.empty()) {
        backbone = std::make_unique<metrics::LpipsBackbone>(metrics::LpipsBackbone::load(base_lpips_path));
      }
      const auto samples = harness::make_eval_samples(cfg, ds.eval_clips);
      const auto report = harness::run_baseline(cfg, samples, backbone.get());
      std::ostringstream os;
      os << "# bicubic baseline (mode: "
         << (cfg.degradation.mode == degrade::DegradationMode::realistic ? "realistic" : "bicubic_only")
         << ", triplets: " << samples.size() << ")\n";
      os << "Models    PSNR      SSIM      LPIPS\n";
      os << "Baseline  " << metrics::format_metric(report.psnr_db) << "   "
         << metrics::format_metric(report.ssim) << "    "
         << (report.lpips ? metrics::format_metric(*report.lpips) : std::string("absent")) << "\n";
      std::cout << os.str();
      write_report(cfg, "baseline.txt", os.str());
    } else if (*infer_cmd) {
      const auto cfg = infer_cfg.resolve();
      const harness::Dataset ds = harness::load_dataset(cfg);
      const data::CineClip* clip = nullptr;
      if (infer_patient.empty()) {
        clip = &ds.eval_clips.front();
      } else {
        clip = find_clip(ds, infer_patient, infer_slice.empty() ? "0" : infer_slice);
        if (!clip) raise(ErrorCode::SeriesNotFound, infer_patient + "/" + infer_slice);
      }
      harness::TrainedModel model = harness::load_trained_model(cfg);
      const fs::path out_dir = infer_out.empty() ? fs::path(cfg.output_dir) / "dumps" : fs::path(infer_out);
      fs::create_directories(out_dir);
      const fs::path* dump = dump_trajectory ? &out_dir : nullptr;
      const auto result = harness::run_inference(cfg, model.autoencoder, *model.unet, model.schedule,
                                                 *clip, infer_seed, dump);
      for (std::size_t k = 0; k < result.frames.size(); ++k) {
        const fs::path file = out_dir / ("sr_frame_" + std::to_string(k) + ".pgm");
        write_pgm(file, result.frames[k], 255);
        std::cout << "wrote " << file.string() << "\n";
      }
      for (const auto& f : result.trajectory_files) std::cout << "wrote " << f.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Unhandled: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
