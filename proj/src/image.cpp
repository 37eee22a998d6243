#include "cinesr/image.hpp"

#include <cmath>

namespace cinesr {

float sample_bilinear(const Image& img, float y, float x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const float fy = y - static_cast<float>(y0);
  const float fx = x - static_cast<float>(x0);
  const float v00 = img.at_clamped(y0, x0);
  const float v01 = img.at_clamped(y0, x0 + 1);
  const float v10 = img.at_clamped(y0 + 1, x0);
  const float v11 = img.at_clamped(y0 + 1, x0 + 1);
  const float top = v00 + fx * (v01 - v00);
  const float bot = v10 + fx * (v11 - v10);
  return top + fy * (bot - top);
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  Image out(out_h, out_w);
  const float sy = static_cast<float>(img.h) / static_cast<float>(out_h);
  const float sx = static_cast<float>(img.w) / static_cast<float>(out_w);
  for (int y = 0; y < out_h; ++y) {
    const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
    for (int x = 0; x < out_w; ++x) {
      const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      out.at(y, x) = sample_bilinear(img, src_y, src_x);
    }
  }
  return out;
}

std::vector<float> gaussian_kernel(double sigma, int radius) {
  std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double g = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = static_cast<float>(g);
    sum += g;
  }
  for (auto& x : k) x = static_cast<float>(x / sum);
  return k;
}

Image gaussian_blur(const Image& img, double sigma, int radius) {
  if (sigma <= 0.0) return img;
  if (radius <= 0) radius = static_cast<int>(std::ceil(3.0 * sigma));
  const std::vector<float> k = gaussian_kernel(sigma, radius);

  Image tmp(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] * img.at_clamped(y, x + i);
      }
      tmp.at(y, x) = acc;
    }
  }
  Image out(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] * tmp.at_clamped(y + i, x);
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

void clamp01(Image& img) {
  for (auto& x : img.v) x = std::clamp(x, 0.f, 1.f);
}

bool all_finite(const Image& img) {
  for (float x : img.v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

float min_value(const Image& img) {
  float m = img.v.empty() ? 0.f : img.v[0];
  for (float x : img.v) m = std::min(m, x);
  return m;
}

float max_value(const Image& img) {
  float m = img.v.empty() ? 0.f : img.v[0];
  for (float x : img.v) m = std::max(m, x);
  return m;
}

double mean_value(const Image& img) {
  double s = 0.0;
  for (float x : img.v) s += x;
  return img.v.empty() ? 0.0 : s / static_cast<double>(img.v.size());
}

}  // namespace cinesr
