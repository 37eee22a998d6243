#include "cinesr/degrade.hpp"

#include <cmath>

#include "cinesr/error.hpp"
#include "cinesr/rng.hpp"

namespace cinesr::degrade {

namespace {

// Catmull-Rom kernel, a = -0.5.
inline double cubic_weight(double x) {
  x = std::fabs(x);
  if (x < 1.0) return ((1.5 * x - 2.5) * x) * x + 1.0;
  if (x < 2.0) return (((-0.5 * x + 2.5) * x) - 4.0) * x + 2.0;
  return 0.0;
}

struct CubicTap {
  int idx[4];
  float w[4];
};

std::vector<CubicTap> cubic_taps(int in_size, int out_size) {
  std::vector<CubicTap> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    const double src = (o + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(src)) - 1;
    const double frac = src - std::floor(src);
    double wsum = 0.0;
    double w[4];
    for (int k = 0; k < 4; ++k) {
      w[k] = cubic_weight(static_cast<double>(k - 1) - frac);
      wsum += w[k];
    }
    for (int k = 0; k < 4; ++k) {
      taps[static_cast<std::size_t>(o)].idx[k] = std::clamp(base + k, 0, in_size - 1);
      taps[static_cast<std::size_t>(o)].w[k] = static_cast<float>(w[k] / wsum);
    }
  }
  return taps;
}

}  // namespace

void DegradationConfig::validate() const {
  if (scale < 1) raise(ErrorCode::InvalidConfig, "scale must be >= 1");
  auto check_range = [](const auto& r, const char* name) {
    if (r[0] > r[1]) raise(ErrorCode::InvalidConfig, std::string(name) + " range has lo > hi");
  };
  check_range(blur_sigma_range, "blur_sigma");
  check_range(resize_range, "resize");
  check_range(noise_sigma_range, "noise_sigma");
  check_range(jpeg_quality_range, "jpeg_quality");
  check_range(blur_sigma_range2, "blur_sigma2");
  check_range(resize_range2, "resize2");
  check_range(noise_sigma_range2, "noise_sigma2");
  check_range(jpeg_quality_range2, "jpeg_quality2");
  for (double p : {blur_prob, resize_prob, noise_prob, jpeg_prob, second_blur_prob, sinc_prob}) {
    if (p < 0.0 || p > 1.0) raise(ErrorCode::InvalidConfig, "stage probability outside [0,1]");
  }
  for (int k : blur_kernel_sizes) {
    if (k < 3 || k % 2 == 0) raise(ErrorCode::InvalidConfig, "blur kernel sizes must be odd and >= 3");
  }
  if (blur_kernel_sizes.empty()) raise(ErrorCode::InvalidConfig, "blur_kernel_sizes empty");
}

Image bicubic_resize_to(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) raise(ErrorCode::InvalidScale, "output shape must be >= 1x1");
  const auto tx = cubic_taps(img.w, out_w);
  const auto ty = cubic_taps(img.h, out_h);

  // Horizontal pass then vertical pass.
  Image tmp(img.h, out_w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const CubicTap& t = tx[static_cast<std::size_t>(x)];
      float acc = 0.f;
      for (int k = 0; k < 4; ++k) acc += t.w[k] * img.at(y, t.idx[k]);
      tmp.at(y, x) = acc;
    }
  }
  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const CubicTap& t = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      float acc = 0.f;
      for (int k = 0; k < 4; ++k) acc += t.w[k] * tmp.at(t.idx[k], x);
      out.at(y, x) = std::clamp(acc, 0.f, 1.f);
    }
  }
  return out;
}

Image bicubic_resize(const Image& img, double scale) {
  if (!(scale > 0.0)) raise(ErrorCode::InvalidScale, "scale must be > 0");
  const int out_h = static_cast<int>(std::lround(img.h * scale));
  const int out_w = static_cast<int>(std::lround(img.w * scale));
  if (out_h < 1 || out_w < 1) raise(ErrorCode::InvalidScale, "scaled shape rounds below 1 pixel");
  return bicubic_resize_to(img, out_h, out_w);
}

std::vector<Image> degrade_bicubic(const std::vector<Image>& frames, int scale) {
  if (scale < 1) raise(ErrorCode::InvalidScale, "scale must be >= 1");
  std::vector<Image> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.h % scale != 0 || f.w % scale != 0) {
      raise(ErrorCode::InvalidScale, "frame shape not divisible by scale");
    }
    out.push_back(bicubic_resize_to(f, f.h / scale, f.w / scale));
  }
  return out;
}

Image jpeg_roundtrip(const Image& img, int quality) {
  quality = std::clamp(quality, 1, 100);

  // Standard Annex K luminance quantization table.
  static const int kLumaTable[64] = {
      16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
      14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
      18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
      49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  double q[64];
  for (int i = 0; i < 64; ++i) {
    q[i] = std::clamp((kLumaTable[i] * scale + 50) / 100, 1, 255);
  }

  // 8-point DCT-II basis, orthonormal.
  static double dct[8][8];
  static bool init = false;
  if (!init) {
    for (int k = 0; k < 8; ++k) {
      const double c = (k == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) {
        dct[k][n] = c * std::cos((2 * n + 1) * k * 3.14159265358979323846 / 16.0);
      }
    }
    init = true;
  }

  const int bh = (img.h + 7) / 8;
  const int bw = (img.w + 7) / 8;
  Image out(img.h, img.w);

  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      double block[8][8];
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          const float v = img.at_clamped(by * 8 + y, bx * 8 + x);
          const double u8 = std::lround(std::clamp(v, 0.f, 1.f) * 255.f);
          block[y][x] = u8 - 128.0;
        }
      }
      double row[8][8], coef[8][8];
      for (int y = 0; y < 8; ++y) {        // rows
        for (int k = 0; k < 8; ++k) {
          double s = 0.0;
          for (int n = 0; n < 8; ++n) s += dct[k][n] * block[y][n];
          row[y][k] = s;
        }
      }
      for (int x = 0; x < 8; ++x) {        // columns
        for (int k = 0; k < 8; ++k) {
          double s = 0.0;
          for (int n = 0; n < 8; ++n) s += dct[k][n] * row[n][x];
          coef[k][x] = s;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          const double step = q[y * 8 + x];
          coef[y][x] = std::round(coef[y][x] / step) * step;
        }
      }
      for (int x = 0; x < 8; ++x) {        // inverse columns
        for (int n = 0; n < 8; ++n) {
          double s = 0.0;
          for (int k = 0; k < 8; ++k) s += dct[k][n] * coef[k][x];
          row[n][x] = s;
        }
      }
      for (int y = 0; y < 8; ++y) {        // inverse rows
        for (int n = 0; n < 8; ++n) {
          double s = 0.0;
          for (int k = 0; k < 8; ++k) s += dct[k][n] * row[y][k];
          const double u8 = std::clamp(std::round(s + 128.0), 0.0, 255.0);
          const int yy = by * 8 + y, xx = bx * 8 + n;
          if (yy < img.h && xx < img.w) out.at(yy, xx) = static_cast<float>(u8 / 255.0);
        }
      }
    }
  }
  return out;
}

std::vector<float> sinc_kernel(int ksize, double cutoff) {
  const int r = ksize / 2;
  std::vector<float> k(static_cast<std::size_t>(ksize) * ksize);
  double sum = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double rad = std::sqrt(static_cast<double>(x) * x + static_cast<double>(y) * y);
      double v;
      if (rad < 1e-12) {
        v = cutoff * cutoff / (4.0 * 3.14159265358979323846);
      } else {
        v = cutoff * std::cyl_bessel_j(1, cutoff * rad) / (2.0 * 3.14159265358979323846 * rad);
      }
      k[static_cast<std::size_t>(y + r) * ksize + (x + r)] = static_cast<float>(v);
      sum += v;
    }
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

Image convolve2d_replicate(const Image& img, const std::vector<float>& kernel, int ksize) {
  const int r = ksize / 2;
  Image out(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      float acc = 0.f;
      for (int ky = -r; ky <= r; ++ky) {
        for (int kx = -r; kx <= r; ++kx) {
          acc += kernel[static_cast<std::size_t>(ky + r) * ksize + (kx + r)] *
                 img.at_clamped(y + ky, x + kx);
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

namespace {

struct StageDraws {
  bool do_blur = false;
  int blur_ksize = 7;
  double blur_sigma = 1.0;
  bool do_resize = false;
  double resize_factor = 1.0;
  bool do_noise = false;
  double noise_sigma = 0.0;
  bool do_jpeg = false;
  int jpeg_quality = 90;
};

StageDraws draw_stage(Rng& rng, const DegradationConfig& c, bool second) {
  StageDraws d;
  d.do_blur = rng.bernoulli(second ? c.second_blur_prob : c.blur_prob);
  d.blur_ksize = c.blur_kernel_sizes[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(c.blur_kernel_sizes.size()) - 1))];
  const auto& bs = second ? c.blur_sigma_range2 : c.blur_sigma_range;
  d.blur_sigma = rng.uniform(bs[0], bs[1]);
  d.do_resize = rng.bernoulli(c.resize_prob);
  const auto& rr = second ? c.resize_range2 : c.resize_range;
  d.resize_factor = rng.uniform(rr[0], rr[1]);
  d.do_noise = rng.bernoulli(c.noise_prob);
  const auto& ns = second ? c.noise_sigma_range2 : c.noise_sigma_range;
  d.noise_sigma = rng.uniform(ns[0], ns[1]);
  d.do_jpeg = rng.bernoulli(c.jpeg_prob);
  const auto& jq = second ? c.jpeg_quality_range2 : c.jpeg_quality_range;
  d.jpeg_quality = static_cast<int>(rng.uniform_int(jq[0], jq[1]));
  return d;
}

// One blur/resize/noise/JPEG pass applied identically to every frame. The
// noise field itself is shared, not just its sigma, so a degraded triplet of
// identical frames stays identical.
void apply_stage(std::vector<Image>& frames, const StageDraws& d, Rng& rng) {
  if (d.do_blur) {
    for (auto& f : frames) f = gaussian_blur(f, d.blur_sigma, d.blur_ksize / 2);
  }
  if (d.do_resize) {
    const int oh = std::max(8, static_cast<int>(std::lround(frames[0].h * d.resize_factor)));
    const int ow = std::max(8, static_cast<int>(std::lround(frames[0].w * d.resize_factor)));
    for (auto& f : frames) f = bicubic_resize_to(f, oh, ow);
  }
  if (d.do_noise && d.noise_sigma > 0.0) {
    Image noise(frames[0].h, frames[0].w);
    for (auto& v : noise.v) v = static_cast<float>(d.noise_sigma * rng.normal());
    for (auto& f : frames) {
      for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] += noise.v[i];
      clamp01(f);
    }
  }
  if (d.do_jpeg) {
    for (auto& f : frames) f = jpeg_roundtrip(f, d.jpeg_quality);
  }
}

}  // namespace

std::vector<Image> degrade_realistic(const std::vector<Image>& frames, const DegradationConfig& config,
                                     std::uint64_t seed) {
  config.validate();
  if (config.mode != DegradationMode::realistic) {
    raise(ErrorCode::ConfigModeMismatch, "degrade_realistic requires mode == realistic");
  }
  if (frames.empty()) raise(ErrorCode::ShapeMismatch, "no frames");
  const int h = frames[0].h, w = frames[0].w;
  for (const auto& f : frames) {
    if (f.h != h || f.w != w) raise(ErrorCode::ShapeMismatch, "frames differ in shape");
  }
  if (h % config.scale != 0 || w % config.scale != 0) {
    raise(ErrorCode::InvalidScale, "frame shape not divisible by scale");
  }

  Rng rng(seed);
  std::vector<Image> work = frames;
  apply_stage(work, draw_stage(rng, config, false), rng);
  if (config.second_order) {
    apply_stage(work, draw_stage(rng, config, true), rng);
  }

  // Final stage: land exactly on the target shape, then sinc or identity.
  const int th = h / config.scale, tw = w / config.scale;
  for (auto& f : work) {
    if (f.h != th || f.w != tw) f = bicubic_resize_to(f, th, tw);
  }
  const bool do_sinc = rng.bernoulli(config.sinc_prob);
  const double cutoff = rng.uniform(3.14159265358979323846 / 3.0, 3.14159265358979323846);
  if (do_sinc) {
    const int ksize = std::min(11, (std::min(th, tw) / 2) * 2 - 1);
    if (ksize >= 3) {
      const auto kernel = sinc_kernel(ksize, cutoff);
      for (auto& f : work) f = convolve2d_replicate(f, kernel, ksize);
    }
  }
  for (auto& f : work) clamp01(f);
  return work;
}

}  // namespace cinesr::degrade
