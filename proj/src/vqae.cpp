#include "cinesr/vqae.hpp"

#include <cmath>

#include "cinesr/error.hpp"
#include "cinesr/metrics.hpp"

namespace cinesr::vqae {

namespace {

nn::Tensorf image_to_tensor(const Image& img) {
  nn::Tensorf t({1, 1, img.h, img.w});
  std::copy(img.v.begin(), img.v.end(), t.data.begin());
  return t;
}

Image tensor_to_image(const nn::Tensorf& t, int n_index) {
  const int h = t.dim(2), w = t.dim(3);
  Image img(h, w);
  std::copy_n(t.ptr() + static_cast<std::int64_t>(n_index) * h * w, static_cast<std::int64_t>(h) * w,
              img.v.begin());
  return img;
}

}  // namespace

bool Codebook::has_duplicates(float tol) const {
  for (int i = 0; i < n_codes; ++i) {
    for (int j = i + 1; j < n_codes; ++j) {
      float d2 = 0.f;
      for (int c = 0; c < c_latent; ++c) {
        const float d = code(i)[c] - code(j)[c];
        d2 += d * d;
      }
      if (d2 <= tol * tol) return true;
    }
  }
  return false;
}

LatentGrid quantize(const LatentGrid& latent, const Codebook& codebook) {
  if (latent.c != codebook.c_latent) {
    raise(ErrorCode::DimensionMismatch, "latent channels " + std::to_string(latent.c) +
                                            " != codebook dim " + std::to_string(codebook.c_latent));
  }
  LatentGrid out = latent;
  out.quantized = true;
  out.indices.assign(static_cast<std::size_t>(latent.h) * latent.w, 0);
  for (int y = 0; y < latent.h; ++y) {
    for (int x = 0; x < latent.w; ++x) {
      float best = std::numeric_limits<float>::max();
      int best_k = 0;
      for (int k = 0; k < codebook.n_codes; ++k) {
        float d2 = 0.f;
        for (int c = 0; c < latent.c; ++c) {
          const float d = latent.at(y, x, c) - codebook.code(k)[c];
          d2 += d * d;
        }
        if (d2 < best) {  // strict: ties keep the lowest index
          best = d2;
          best_k = k;
        }
      }
      out.indices[static_cast<std::size_t>(y) * latent.w + x] = best_k;
      for (int c = 0; c < latent.c; ++c) out.at(y, x, c) = codebook.code(best_k)[c];
    }
  }
  return out;
}

VqAutoencoder::VqAutoencoder(const VqaeConfig& config, std::uint64_t seed) : cfg_(config) {
  Rng rng(seed);
  const int b = cfg_.base_channels;
  const int cl = cfg_.c_latent;

  encoder_.add(std::make_unique<nn::Conv2d<float>>("enc.c0", 1, b, 3, 1, rng));
  encoder_.add(std::make_unique<nn::SiLU<float>>());
  encoder_.add(std::make_unique<nn::Conv2d<float>>("enc.c1", b, 2 * b, 3, 2, rng));
  encoder_.add(std::make_unique<nn::SiLU<float>>());
  encoder_.add(std::make_unique<nn::Conv2d<float>>("enc.c2", 2 * b, 2 * b, 3, 2, rng));
  encoder_.add(std::make_unique<nn::SiLU<float>>());
  encoder_.add(std::make_unique<nn::Conv2d<float>>("enc.c3", 2 * b, 2 * b, 3, 1, rng));
  encoder_.add(std::make_unique<nn::SiLU<float>>());
  encoder_.add(std::make_unique<nn::Conv2d<float>>("enc.c4", 2 * b, cl, 1, 1, rng));

  decoder_.add(std::make_unique<nn::Conv2d<float>>("dec.c0", cl, 2 * b, 3, 1, rng));
  decoder_.add(std::make_unique<nn::SiLU<float>>());
  decoder_.add(std::make_unique<nn::Conv2d<float>>("dec.c1", 2 * b, 2 * b, 3, 1, rng));
  decoder_.add(std::make_unique<nn::SiLU<float>>());
  decoder_.add(std::make_unique<nn::Upsample2x<float>>());
  decoder_.add(std::make_unique<nn::Conv2d<float>>("dec.c2", 2 * b, 2 * b, 3, 1, rng));
  decoder_.add(std::make_unique<nn::SiLU<float>>());
  decoder_.add(std::make_unique<nn::Upsample2x<float>>());
  decoder_.add(std::make_unique<nn::Conv2d<float>>("dec.c3", 2 * b, b, 3, 1, rng));
  decoder_.add(std::make_unique<nn::SiLU<float>>());
  decoder_.add(std::make_unique<nn::Conv2d<float>>("dec.c4", b, 1, 3, 1, rng));

  codebook_.n_codes = cfg_.n_codes;
  codebook_.c_latent = cl;
  codebook_.entries.resize(static_cast<std::size_t>(cfg_.n_codes) * cl);
  for (auto& e : codebook_.entries) e = static_cast<float>(0.5 * rng.normal());
}

std::vector<nn::Param<float>*> VqAutoencoder::parameters() {
  std::vector<nn::Param<float>*> out;
  encoder_.collect(out);
  decoder_.collect(out);
  return out;
}

nn::Tensorf VqAutoencoder::encode_batch(const nn::Tensorf& frames) const {
  const int f = cfg_.downsample_factor;
  if (frames.dim(2) % f != 0 || frames.dim(3) % f != 0) {
    raise(ErrorCode::ShapeError, "frame shape not divisible by downsample factor");
  }
  return encoder_.forward(frames);
}

void VqAutoencoder::quantize_tensor(const nn::Tensorf& z, nn::Tensorf& z_q,
                                    std::vector<int>& indices) const {
  const int n = z.dim(0), c = z.dim(1), h = z.dim(2), w = z.dim(3);
  z_q = nn::Tensorf(z.shape);
  indices.assign(static_cast<std::size_t>(n) * h * w, 0);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    for (std::int64_t p = 0; p < hw; ++p) {
      float best = std::numeric_limits<float>::max();
      int best_k = 0;
      for (int k = 0; k < codebook_.n_codes; ++k) {
        float d2 = 0.f;
        for (int cc = 0; cc < c; ++cc) {
          const float d = z.data[(static_cast<std::int64_t>(i) * c + cc) * hw + p] - codebook_.code(k)[cc];
          d2 += d * d;
        }
        if (d2 < best) {
          best = d2;
          best_k = k;
        }
      }
      indices[static_cast<std::size_t>(i * hw + p)] = best_k;
      for (int cc = 0; cc < c; ++cc) {
        z_q.data[(static_cast<std::int64_t>(i) * c + cc) * hw + p] = codebook_.code(best_k)[cc];
      }
    }
  }
}

nn::Tensorf VqAutoencoder::decode_batch(const nn::Tensorf& latents, bool apply_quantization) const {
  nn::Tensorf z = latents;
  if (apply_quantization) {
    std::vector<int> idx;
    nn::Tensorf z_q;
    quantize_tensor(latents, z_q, idx);
    z = std::move(z_q);
  }
  nn::Tensorf out = decoder_.forward(z);
  for (auto& v : out.data) v = std::clamp(v, 0.f, 1.f);
  return out;
}

LatentGrid VqAutoencoder::encode(const Image& frame) const {
  const nn::Tensorf z = encode_batch(image_to_tensor(frame));
  LatentGrid grid;
  grid.h = z.dim(2);
  grid.w = z.dim(3);
  grid.c = z.dim(1);
  grid.values.resize(static_cast<std::size_t>(grid.h) * grid.w * grid.c);
  const std::int64_t hw = static_cast<std::int64_t>(grid.h) * grid.w;
  for (int c = 0; c < grid.c; ++c) {
    for (std::int64_t p = 0; p < hw; ++p) {
      grid.values[static_cast<std::size_t>(p * grid.c + c)] = z.data[static_cast<std::size_t>(c * hw + p)];
    }
  }
  return grid;
}

Image VqAutoencoder::decode(const LatentGrid& latent) const {
  if (latent.c != cfg_.c_latent) {
    raise(ErrorCode::ShapeError, "latent channels " + std::to_string(latent.c) + " != " +
                                     std::to_string(cfg_.c_latent));
  }
  const LatentGrid q = latent.quantized ? latent : quantize(latent, codebook_);
  nn::Tensorf z({1, q.c, q.h, q.w});
  const std::int64_t hw = static_cast<std::int64_t>(q.h) * q.w;
  for (int c = 0; c < q.c; ++c) {
    for (std::int64_t p = 0; p < hw; ++p) {
      z.data[static_cast<std::size_t>(c * hw + p)] = q.values[static_cast<std::size_t>(p * q.c + c)];
    }
  }
  const nn::Tensorf out = decode_batch(z, /*apply_quantization=*/false);
  return tensor_to_image(out, 0);
}

TrainStats VqAutoencoder::train(const std::vector<Image>& train_frames,
                                const std::vector<Image>& val_frames, const TrainConfig& tc) {
  if (train_frames.empty()) raise(ErrorCode::DataUnavailable, "no training frames");
  Rng rng(tc.seed);
  nn::Adam<float> opt(parameters(), tc.learning_rate);

  const int fh = train_frames[0].h, fw = train_frames[0].w;
  auto make_batch = [&](int n) {
    nn::Tensorf batch({n, 1, fh, fw});
    for (int i = 0; i < n; ++i) {
      const Image& f =
          train_frames[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(train_frames.size()) - 1))];
      std::copy(f.v.begin(), f.v.end(), batch.ptr() + static_cast<std::int64_t>(i) * fh * fw);
    }
    return batch;
  };

  // Codebook bootstrap: sample encoder outputs of one batch so that codes
  // start on the data manifold instead of random space.
  {
    const nn::Tensorf z = encode_batch(make_batch(tc.batch_size));
    const int c = z.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(z.dim(2)) * z.dim(3);
    const std::int64_t total = z.dim(0) * hw;
    for (int k = 0; k < codebook_.n_codes; ++k) {
      const std::int64_t p = rng.uniform_int(0, total - 1);
      const std::int64_t i = p / hw, pp = p % hw;
      for (int cc = 0; cc < c; ++cc) {
        codebook_.entries[static_cast<std::size_t>(k) * c + cc] =
            z.data[(static_cast<std::int64_t>(i) * c + cc) * hw + pp] +
            static_cast<float>(0.01 * rng.normal());
      }
    }
  }

  TrainStats stats;
  double quant_err_first = -1.0, quant_err_last = 0.0;
  for (int iter = 0; iter < tc.iterations; ++iter) {
    const nn::Tensorf x = make_batch(tc.batch_size);
    opt.zero_grad();

    nn::Tensorf z = encoder_.forward(x);
    nn::Tensorf z_q;
    std::vector<int> indices;
    quantize_tensor(z, z_q, indices);

    nn::Tensorf recon = decoder_.forward(z_q);

    const std::int64_t n_rec = recon.numel();
    double l1 = 0.0;
    nn::Tensorf drecon(recon.shape);
    for (std::int64_t i = 0; i < n_rec; ++i) {
      const float d = recon.data[static_cast<std::size_t>(i)] - x.data[static_cast<std::size_t>(i)];
      l1 += std::fabs(d);
      drecon.data[static_cast<std::size_t>(i)] = (d > 0 ? 1.f : (d < 0 ? -1.f : 0.f)) / static_cast<float>(n_rec);
    }
    l1 /= static_cast<double>(n_rec);

    const std::int64_t n_lat = z.numel();
    double quant_err = 0.0;
    for (std::int64_t i = 0; i < n_lat; ++i) {
      const float d = z.data[static_cast<std::size_t>(i)] - z_q.data[static_cast<std::size_t>(i)];
      quant_err += d * d;
    }
    quant_err /= static_cast<double>(n_lat);
    if (quant_err_first < 0.0) quant_err_first = quant_err;
    quant_err_last = quant_err;

    // Straight-through: the decoder input gradient flows to the encoder
    // unchanged; commitment pulls z toward its code.
    nn::Tensorf dz = decoder_.backward(drecon);
    const float beta = static_cast<float>(tc.commitment_beta);
    for (std::int64_t i = 0; i < n_lat; ++i) {
      dz.data[static_cast<std::size_t>(i)] +=
          2.f * beta * (z.data[static_cast<std::size_t>(i)] - z_q.data[static_cast<std::size_t>(i)]) /
          static_cast<float>(n_lat);
    }
    encoder_.backward(dz);

    // Codebook loss gradient: pull selected entries toward encoder outputs.
    const int c = z.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(z.dim(2)) * z.dim(3);
    for (int i = 0; i < z.dim(0); ++i) {
      for (std::int64_t p = 0; p < hw; ++p) {
        const int k = indices[static_cast<std::size_t>(i * hw + p)];
        for (int cc = 0; cc < c; ++cc) {
          const float e = codebook_.entries[static_cast<std::size_t>(k) * c + cc];
          const float zv = z.data[(static_cast<std::int64_t>(i) * c + cc) * hw + p];
          codebook_.entries[static_cast<std::size_t>(k) * c + cc] =
              e - static_cast<float>(tc.learning_rate) * 2.f * (e - zv) / static_cast<float>(n_lat / c);
        }
      }
    }

    opt.step();
    stats.loss_log.push_back(l1 + tc.commitment_beta * quant_err);
    stats.iterations_run = iter + 1;

    if (tc.target_psnr_db > 0.0 && !val_frames.empty() && (iter + 1) % tc.eval_every == 0) {
      const double psnr = reconstruction_psnr_db(*this, val_frames);
      stats.final_val_psnr_db = psnr;
      if (psnr >= tc.target_psnr_db) break;
    }
  }
  if (!val_frames.empty()) stats.final_val_psnr_db = reconstruction_psnr_db(*this, val_frames);
  stats.initial_quant_error = quant_err_first;
  stats.final_quant_error = quant_err_last;
  return stats;
}

nn::Checkpoint VqAutoencoder::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.header["kind"] = "vq_autoencoder";
  ckpt.header["downsample_factor"] = cfg_.downsample_factor;
  ckpt.header["c_latent"] = cfg_.c_latent;
  ckpt.header["n_codes"] = cfg_.n_codes;
  ckpt.header["base_channels"] = cfg_.base_channels;
  auto* self = const_cast<VqAutoencoder*>(this);
  for (auto* p : self->parameters()) ckpt.add(p->name, p->value);
  nn::Tensorf cb({cfg_.n_codes, cfg_.c_latent});
  std::copy(codebook_.entries.begin(), codebook_.entries.end(), cb.data.begin());
  ckpt.add("codebook", cb);
  return ckpt;
}

void VqAutoencoder::load_checkpoint(const nn::Checkpoint& ckpt) {
  for (auto* p : parameters()) {
    p->value = ckpt.require(p->name, p->value.shape);
  }
  const nn::Tensorf& cb = ckpt.require("codebook", {cfg_.n_codes, cfg_.c_latent});
  std::copy(cb.data.begin(), cb.data.end(), codebook_.entries.begin());
}

VqAutoencoder VqAutoencoder::from_checkpoint(const nn::Checkpoint& ckpt) {
  VqaeConfig cfg;
  try {
    cfg.downsample_factor = ckpt.header.at("downsample_factor").get<int>();
    cfg.c_latent = ckpt.header.at("c_latent").get<int>();
    cfg.n_codes = ckpt.header.at("n_codes").get<int>();
    cfg.base_channels = ckpt.header.at("base_channels").get<int>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::CheckpointMismatch, std::string("bad autoencoder header: ") + e.what());
  }
  VqAutoencoder ae(cfg);
  ae.load_checkpoint(ckpt);
  return ae;
}

double reconstruction_psnr_db(const VqAutoencoder& ae, const std::vector<Image>& frames) {
  double sum = 0.0;
  for (const auto& f : frames) {
    const Image recon = ae.decode(ae.encode(f));
    sum += metrics::psnr(f, recon);
  }
  return sum / static_cast<double>(frames.size());
}

}  // namespace cinesr::vqae
