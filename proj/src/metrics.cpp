#include "cinesr/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cinesr/error.hpp"
#include "cinesr/nn/checkpoint.hpp"

namespace cinesr::metrics {

double psnr(const Image& reference, const Image& test) {
  if (!reference.same_shape(test)) raise(ErrorCode::ShapeMismatch, "psnr inputs differ in shape");
  double mse = 0.0;
  for (std::size_t i = 0; i < reference.v.size(); ++i) {
    const double d = static_cast<double>(reference.v[i]) - test.v[i];
    mse += d * d;
  }
  mse /= static_cast<double>(reference.v.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& reference, const Image& test) {
  if (!reference.same_shape(test)) raise(ErrorCode::ShapeMismatch, "ssim inputs differ in shape");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  if (reference.h < kWin || reference.w < kWin) {
    raise(ErrorCode::TooSmall, "ssim needs at least 11x11 images");
  }

  double window[kWin][kWin];
  {
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y) {
      for (int x = 0; x < kWin; ++x) {
        const double dy = y - kWin / 2, dx = x - kWin / 2;
        window[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        sum += window[y][x];
      }
    }
    for (auto& row : window) {
      for (auto& v : row) v /= sum;
    }
  }

  double total = 0.0;
  std::int64_t count = 0;
  for (int cy = 0; cy + kWin <= reference.h; ++cy) {
    for (int cx = 0; cx + kWin <= reference.w; ++cx) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          const double w = window[y][x];
          const double a = reference.at(cy + y, cx + x);
          const double b = test.at(cy + y, cx + x);
          mx += w * a;
          my += w * b;
          mxx += w * a * a;
          myy += w * b * b;
          mxy += w * a * b;
        }
      }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cov = mxy - mx * my;
      const double l = (2.0 * mx * my + kC1) / (mx * mx + my * my + kC1);
      const double cs = (2.0 * cov + kC2) / (vx + vy + kC2);
      total += l * cs;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

namespace {

// Stride-1 zero-padded convolution over multi-channel planes + ReLU.
nn::Tensorf conv_relu(const nn::Tensorf& x, const nn::Tensorf& weight, const nn::Tensorf& bias) {
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int cout = weight.dim(0), k = weight.dim(2), r = k / 2;
  nn::Tensorf y({cout, h, w});
  for (int co = 0; co < cout; ++co) {
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        float acc = bias.data[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = -r; ky <= r; ++ky) {
            const int sy = yy + ky;
            if (sy < 0 || sy >= h) continue;
            for (int kx = -r; kx <= r; ++kx) {
              const int sx = xx + kx;
              if (sx < 0 || sx >= w) continue;
              acc += weight.data[static_cast<std::size_t>(
                         ((co * cin + ci) * k + (ky + r)) * k + (kx + r))] *
                     x.data[static_cast<std::size_t>((ci * h + sy) * w + sx)];
            }
          }
        }
        y.data[static_cast<std::size_t>((co * h + yy) * w + xx)] = std::max(acc, 0.f);
      }
    }
  }
  return y;
}

nn::Tensorf avgpool2(const nn::Tensorf& x) {
  const int c = x.dim(0), h = x.dim(1) / 2, w = x.dim(2) / 2;
  nn::Tensorf y({c, h, w});
  for (int cc = 0; cc < c; ++cc) {
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        const float s = x.data[static_cast<std::size_t>((cc * x.dim(1) + 2 * yy) * x.dim(2) + 2 * xx)] +
                        x.data[static_cast<std::size_t>((cc * x.dim(1) + 2 * yy) * x.dim(2) + 2 * xx + 1)] +
                        x.data[static_cast<std::size_t>((cc * x.dim(1) + 2 * yy + 1) * x.dim(2) + 2 * xx)] +
                        x.data[static_cast<std::size_t>((cc * x.dim(1) + 2 * yy + 1) * x.dim(2) + 2 * xx + 1)];
        y.data[static_cast<std::size_t>((cc * h + yy) * w + xx)] = 0.25f * s;
      }
    }
  }
  return y;
}

}  // namespace

LpipsBackbone LpipsBackbone::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::BackboneUnavailable, "weights file not found: " + path.string());
  }
  nn::Checkpoint ckpt;
  try {
    ckpt = nn::Checkpoint::load(path);
  } catch (const Error& e) {
    raise(ErrorCode::BackboneUnavailable, std::string("cannot load backbone: ") + e.what());
  }
  LpipsBackbone bb;
  try {
    if (ckpt.header.at("kind").get<std::string>() != "lpips_backbone") {
      raise(ErrorCode::BackboneUnavailable, "not a backbone file: " + path.string());
    }
    bb.input_mean = ckpt.header.at("input_mean").get<float>();
    bb.input_std = ckpt.header.at("input_std").get<float>();
    int i = 0;
    for (const auto& s : ckpt.header.at("stages")) {
      Stage stage;
      stage.in_ch = s.at("in_ch").get<int>();
      stage.out_ch = s.at("out_ch").get<int>();
      stage.ksize = s.at("ksize").get<int>();
      stage.pool_before = s.at("pool_before").get<bool>();
      stage.tap = s.at("tap").get<bool>();
      const std::string prefix = "stage" + std::to_string(i);
      stage.weight = ckpt.require(prefix + ".weight", {stage.out_ch, stage.in_ch, stage.ksize, stage.ksize});
      stage.bias = ckpt.require(prefix + ".bias", {stage.out_ch});
      if (stage.tap) stage.tap_weight = ckpt.require(prefix + ".tap_weight", {stage.out_ch});
      bb.stages.push_back(std::move(stage));
      ++i;
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::BackboneUnavailable, std::string("bad backbone manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BackboneUnavailable) throw;
    raise(ErrorCode::BackboneUnavailable, std::string("bad backbone arrays: ") + e.what());
  }
  if (bb.stages.empty()) raise(ErrorCode::BackboneUnavailable, "backbone has no stages");
  return bb;
}

std::vector<nn::Tensorf> LpipsBackbone::features(const Image& img) const {
  // Gray replicated to the stage-0 input channel count, then normalized.
  nn::Tensorf x({stages[0].in_ch, img.h, img.w});
  for (int c = 0; c < stages[0].in_ch; ++c) {
    for (std::size_t i = 0; i < img.v.size(); ++i) {
      x.data[static_cast<std::size_t>(c) * img.v.size() + i] = (img.v[i] - input_mean) / input_std;
    }
  }
  std::vector<nn::Tensorf> taps;
  for (const auto& stage : stages) {
    if (stage.pool_before) x = avgpool2(x);
    x = conv_relu(x, stage.weight, stage.bias);
    if (stage.tap) taps.push_back(x);
  }
  return taps;
}

double LpipsBackbone::distance(const Image& reference, const Image& test) const {
  if (!reference.same_shape(test)) raise(ErrorCode::ShapeMismatch, "lpips inputs differ in shape");
  const auto fa = features(reference);
  const auto fb = features(test);

  double total = 0.0;
  std::size_t tap_i = 0;
  for (const auto& stage : stages) {
    if (!stage.tap) continue;
    const nn::Tensorf& a = fa[tap_i];
    const nn::Tensorf& b = fb[tap_i];
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    double layer_sum = 0.0;
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        double na = 1e-10, nb = 1e-10;
        for (int cc = 0; cc < c; ++cc) {
          const double va = a.data[static_cast<std::size_t>((cc * h + yy) * w + xx)];
          const double vb = b.data[static_cast<std::size_t>((cc * h + yy) * w + xx)];
          na += va * va;
          nb += vb * vb;
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        for (int cc = 0; cc < c; ++cc) {
          const double va = a.data[static_cast<std::size_t>((cc * h + yy) * w + xx)] / na;
          const double vb = b.data[static_cast<std::size_t>((cc * h + yy) * w + xx)] / nb;
          const double d = va - vb;
          layer_sum += stage.tap_weight.data[static_cast<std::size_t>(cc)] * d * d;
        }
      }
    }
    total += layer_sum / (static_cast<double>(h) * w);
    ++tap_i;
  }
  return total;
}

double lpips(const Image& reference, const Image& test, const LpipsBackbone& backbone) {
  return backbone.distance(reference, test);
}

void write_random_backbone(const std::filesystem::path& path, std::uint64_t seed) {
  Rng rng(seed);
  nn::Checkpoint ckpt;
  ckpt.header["kind"] = "lpips_backbone";
  ckpt.header["input_mean"] = 0.5;
  ckpt.header["input_std"] = 0.5;
  nlohmann::json stages = nlohmann::json::array();
  const int chans[4] = {3, 8, 16, 16};
  for (int i = 0; i < 3; ++i) {
    stages.push_back({{"in_ch", chans[i]},
                      {"out_ch", chans[i + 1]},
                      {"ksize", 3},
                      {"pool_before", i > 0},
                      {"tap", true}});
    const double stddev = std::sqrt(2.0 / (chans[i] * 9.0));
    const std::string prefix = "stage" + std::to_string(i);
    ckpt.add(prefix + ".weight", nn::Tensorf::randn({chans[i + 1], chans[i], 3, 3}, rng, stddev));
    nn::Tensorf bias({chans[i + 1]});
    bias.fill(0.02f);
    ckpt.add(prefix + ".bias", bias);
    nn::Tensorf tw({chans[i + 1]});
    for (auto& v : tw.data) v = static_cast<float>(std::fabs(rng.normal()) + 0.1);
    ckpt.add(prefix + ".tap_weight", tw);
  }
  ckpt.header["stages"] = stages;
  ckpt.save(path);
}

void MetricAccumulator::add(double psnr_db, double ssim_value, std::optional<double> lpips_value) {
  psnr_sum_ += psnr_db;
  ssim_sum_ += ssim_value;
  ++n_;
  if (lpips_value) {
    lpips_sum_ += *lpips_value;
    ++n_lpips_;
  }
}

MetricReport MetricAccumulator::report() const {
  if (n_ == 0) raise(ErrorCode::ConfigError, "no frames were evaluated");
  MetricReport r;
  r.n_images = n_;
  r.psnr_db = psnr_sum_ / n_;
  r.ssim = ssim_sum_ / n_;
  if (n_lpips_ == n_) r.lpips = lpips_sum_ / n_;
  return r;
}

std::string format_metric(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace cinesr::metrics
