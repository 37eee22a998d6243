#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace cinesr {

// Single-channel raster, row-major float32.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  Image() = default;
  Image(int height, int width, float fill = 0.f)
      : h(height), w(width), v(static_cast<std::size_t>(height) * width, fill) {}

  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }

  // Border-replicating access.
  float at_clamped(int y, int x) const {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return at(y, x);
  }

  std::size_t size() const { return v.size(); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w; }
};

// Bilinear sample with border replication; (y, x) in pixel coordinates.
float sample_bilinear(const Image& img, float y, float x);

Image resize_bilinear(const Image& img, int out_h, int out_w);

// Separable Gaussian filter, border replicate. Kernel radius defaults to
// ceil(3*sigma) when radius <= 0.
Image gaussian_blur(const Image& img, double sigma, int radius = 0);

std::vector<float> gaussian_kernel(double sigma, int radius);

void clamp01(Image& img);

bool all_finite(const Image& img);

float min_value(const Image& img);
float max_value(const Image& img);
double mean_value(const Image& img);

}  // namespace cinesr
