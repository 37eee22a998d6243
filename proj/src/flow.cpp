#include "cinesr/flow.hpp"

#include <cmath>

#include "cinesr/error.hpp"
#include "cinesr/rng.hpp"

namespace cinesr::flow {

namespace {

constexpr int kMinPyramidSize = 16;

// Five interleaved channels per pixel. For expansions: the quadratic fit
// coefficients (by, bx, ayy, axx, axy); for normal equations: (g11, g12,
// g22, h1, h2).
struct Mat5 {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  Mat5() = default;
  Mat5(int height, int width) : h(height), w(width), v(static_cast<std::size_t>(height) * width * 5, 0.f) {}

  float* row(int y) { return v.data() + static_cast<std::size_t>(y) * w * 5; }
  const float* row(int y) const { return v.data() + static_cast<std::size_t>(y) * w * 5; }
};

// Quadratic polynomial expansion of one image: each pixel's neighborhood is
// fit with x^T A x + b^T x + c under a Gaussian weight of width poly_sigma
// and radius poly_n. Stores (by, bx, ayy, axx, axy) per pixel.
Mat5 polynomial_expansion(const Image& src, int n, double sigma) {
  const int width = src.w, height = src.h;
  if (sigma < 1e-7) sigma = n * 0.3;

  std::vector<double> g(static_cast<std::size_t>(2 * n + 1));
  std::vector<double> xg(g.size()), xxg(g.size());
  double s = 0.0;
  for (int x = -n; x <= n; ++x) {
    g[static_cast<std::size_t>(x + n)] = std::exp(-x * x / (2.0 * sigma * sigma));
    s += g[static_cast<std::size_t>(x + n)];
  }
  for (int x = -n; x <= n; ++x) {
    auto& gx = g[static_cast<std::size_t>(x + n)];
    gx /= s;
    xg[static_cast<std::size_t>(x + n)] = x * gx;
    xxg[static_cast<std::size_t>(x + n)] = x * x * gx;
  }

  // Normal matrix of the weighted monomial basis {1, x, y, x^2, y^2, xy};
  // only four distinct inverse entries are needed.
  double g00 = 0, g11 = 0, g33 = 0, g55 = 0;
  for (int y = -n; y <= n; ++y) {
    for (int x = -n; x <= n; ++x) {
      const double w = g[static_cast<std::size_t>(y + n)] * g[static_cast<std::size_t>(x + n)];
      g00 += w;
      g11 += w * x * x;
      g33 += w * x * x * x * x;
      g55 += w * x * x * y * y;
    }
  }
  // G = [[g00, 0, 0, g11, g11, 0], [0, g11, ...]] with the sparsity of the
  // even/odd monomials; invert the coupled (1, x^2, y^2) block analytically.
  // | g00 g11 g11 |            inverse entries ig03 (1 <-> x^2) and ig33.
  // | g11 g33 g55 |
  // | g11 g55 g33 |
  const double det3 = g00 * (g33 * g33 - g55 * g55) - g11 * (g11 * g33 - g55 * g11) +
                      g11 * (g11 * g55 - g33 * g11);
  const double ig03 = (g11 * g55 - g33 * g11) / det3;
  const double ig33 = (g00 * g33 - g11 * g11) / det3;
  const double ig11 = 1.0 / g11;
  const double ig55 = 1.0 / g55;

  Mat5 dst(height, width);
  std::vector<double> rowbuf(static_cast<std::size_t>(width + 2 * n) * 3);
  double* row = rowbuf.data() + n * 3;

  for (int y = 0; y < height; ++y) {
    // Vertical pass: symmetric (g), antisymmetric (xg) and quadratic (xxg)
    // accumulations with border replication.
    for (int x = 0; x < width; ++x) {
      row[x * 3] = src.at(y, x) * g[static_cast<std::size_t>(n)];
      row[x * 3 + 1] = 0.0;
      row[x * 3 + 2] = 0.0;
    }
    for (int k = 1; k <= n; ++k) {
      const double g0 = g[static_cast<std::size_t>(k + n)];
      const double g1 = xg[static_cast<std::size_t>(k + n)];
      const double g2 = xxg[static_cast<std::size_t>(k + n)];
      const int y0 = std::max(y - k, 0);
      const int y1 = std::min(y + k, height - 1);
      for (int x = 0; x < width; ++x) {
        const double p0 = src.at(y0, x);
        const double p1 = src.at(y1, x);
        row[x * 3] += g0 * (p0 + p1);
        row[x * 3 + 1] += g1 * (p1 - p0);
        row[x * 3 + 2] += g2 * (p0 + p1);
      }
    }

    // Replicate row borders (3 channels per pixel).
    for (int x = 0; x < n * 3; ++x) {
      row[-1 - x] = row[2 - x];
      row[width * 3 + x] = row[width * 3 + x - 3];
    }

    // Horizontal pass and projection onto the polynomial coefficients.
    float* drow = dst.row(y);
    for (int x = 0; x < width; ++x) {
      double b1 = row[x * 3] * g[static_cast<std::size_t>(n)];
      double b2 = 0.0, b3 = row[x * 3 + 1] * g[static_cast<std::size_t>(n)];
      double b4 = 0.0, b5 = row[x * 3 + 2] * g[static_cast<std::size_t>(n)], b6 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double g0 = g[static_cast<std::size_t>(k + n)];
        const double tg = row[(x + k) * 3] + row[(x - k) * 3];
        b1 += tg * g0;
        b4 += tg * xxg[static_cast<std::size_t>(k + n)];
        b2 += (row[(x + k) * 3] - row[(x - k) * 3]) * xg[static_cast<std::size_t>(k + n)];
        b3 += (row[(x + k) * 3 + 1] + row[(x - k) * 3 + 1]) * g0;
        b6 += (row[(x + k) * 3 + 1] - row[(x - k) * 3 + 1]) * xg[static_cast<std::size_t>(k + n)];
        b5 += (row[(x + k) * 3 + 2] + row[(x - k) * 3 + 2]) * g0;
      }
      drow[x * 5] = static_cast<float>(b3 * ig11);               // by
      drow[x * 5 + 1] = static_cast<float>(b2 * ig11);           // bx
      drow[x * 5 + 2] = static_cast<float>(b1 * ig03 + b5 * ig33);  // ayy
      drow[x * 5 + 3] = static_cast<float>(b1 * ig03 + b4 * ig33);  // axx
      drow[x * 5 + 4] = static_cast<float>(b6 * ig55);           // axy
    }
  }
  return dst;
}

// Builds the per-pixel 2x2 normal equations (g11, g12, g22, h1, h2) that
// relate the displacement to the difference of the two expansions, sampling
// the target expansion at the current flow estimate.
Mat5 update_matrices(const Mat5& r0, const Mat5& r1, const FlowField& fl) {
  constexpr int kBorder = 5;
  static const float kBorderScale[kBorder] = {0.14f, 0.14f, 0.4472f, 0.4472f, 0.4472f};

  const int width = fl.w, height = fl.h;
  Mat5 m(height, width);
  for (int y = 0; y < height; ++y) {
    const float* row0 = r0.row(y);
    float* mrow = m.row(y);
    for (int x = 0; x < width; ++x) {
      const float dx = fl.dx(y, x);
      const float dy = fl.dy(y, x);
      const int x1 = static_cast<int>(std::lround(x + dx));
      const int y1 = static_cast<int>(std::lround(y + dy));

      float r2, r3, r4, r5, r6;
      if (x1 >= 0 && x1 < width && y1 >= 0 && y1 < height) {
        const float* ptr = r1.row(y1) + x1 * 5;
        r2 = ptr[0];
        r3 = ptr[1];
        r4 = (row0[x * 5 + 2] + ptr[2]) * 0.5f;
        r5 = (row0[x * 5 + 3] + ptr[3]) * 0.5f;
        r6 = (row0[x * 5 + 4] + ptr[4]) * 0.25f;
      } else {
        r2 = 0.f;
        r3 = 0.f;
        r4 = row0[x * 5 + 2];
        r5 = row0[x * 5 + 3];
        r6 = row0[x * 5 + 4] * 0.5f;
      }
      r2 = (row0[x * 5] - r2) * 0.5f;
      r3 = (row0[x * 5 + 1] - r3) * 0.5f;
      r2 += r4 * dy + r6 * dx;
      r3 += r6 * dy + r5 * dx;

      if (x < kBorder || x >= width - kBorder || y < kBorder || y >= height - kBorder) {
        const float scale = (x < kBorder ? kBorderScale[x] : 1.f) *
                            (x >= width - kBorder ? kBorderScale[width - x - 1] : 1.f) *
                            (y < kBorder ? kBorderScale[y] : 1.f) *
                            (y >= height - kBorder ? kBorderScale[height - y - 1] : 1.f);
        r2 *= scale;
        r3 *= scale;
        r4 *= scale;
        r5 *= scale;
        r6 *= scale;
      }

      mrow[x * 5] = r4 * r4 + r6 * r6;
      mrow[x * 5 + 1] = (r4 + r5) * r6;
      mrow[x * 5 + 2] = r5 * r5 + r6 * r6;
      mrow[x * 5 + 3] = r4 * r2 + r6 * r3;
      mrow[x * 5 + 4] = r6 * r2 + r5 * r3;
    }
  }
  return m;
}

// Box average with replicate border over a (2r+1)^2 window, all 5 channels.
Mat5 box_blur5(const Mat5& m, int radius) {
  const int h = m.h, w = m.w;
  Mat5 tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = m.row(y);
    float* dst = tmp.row(y);
    for (int c = 0; c < 5; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += src[std::clamp(k, 0, w - 1) * 5 + c];
      }
      dst[c] = static_cast<float>(acc);
      for (int x = 1; x < w; ++x) {
        acc += src[std::clamp(x + radius, 0, w - 1) * 5 + c];
        acc -= src[std::clamp(x - radius - 1, 0, w - 1) * 5 + c];
        dst[x * 5 + c] = static_cast<float>(acc);
      }
    }
  }
  const double norm = 1.0 / ((2.0 * radius + 1.0) * (2.0 * radius + 1.0));
  for (int x = 0; x < w; ++x) {
    for (int c = 0; c < 5; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += tmp.row(std::clamp(k, 0, h - 1))[x * 5 + c];
      }
      out.row(0)[x * 5 + c] = static_cast<float>(acc * norm);
      for (int y = 1; y < h; ++y) {
        acc += tmp.row(std::clamp(y + radius, 0, h - 1))[x * 5 + c];
        acc -= tmp.row(std::clamp(y - radius - 1, 0, h - 1))[x * 5 + c];
        out.row(y)[x * 5 + c] = static_cast<float>(acc * norm);
      }
    }
  }
  return out;
}

void solve_flow(const Mat5& m, FlowField& fl) {
  for (int y = 0; y < m.h; ++y) {
    const float* row = m.row(y);
    for (int x = 0; x < m.w; ++x) {
      const double g11 = row[x * 5];
      const double g12 = row[x * 5 + 1];
      const double g22 = row[x * 5 + 2];
      const double h1 = row[x * 5 + 3];
      const double h2 = row[x * 5 + 4];
      const double idet = 1.0 / (g11 * g22 - g12 * g12 + 1e-3);
      fl.dx(y, x) = static_cast<float>((g11 * h2 - g12 * h1) * idet);
      fl.dy(y, x) = static_cast<float>((g22 * h1 - g12 * h2) * idet);
    }
  }
}

FlowField resize_flow(const FlowField& fl, int out_h, int out_w, float gain) {
  FlowField out(out_h, out_w);
  Image cx(fl.h, fl.w), cy(fl.h, fl.w);
  for (int y = 0; y < fl.h; ++y) {
    for (int x = 0; x < fl.w; ++x) {
      cx.at(y, x) = fl.dx(y, x);
      cy.at(y, x) = fl.dy(y, x);
    }
  }
  const Image rx = resize_bilinear(cx, out_h, out_w);
  const Image ry = resize_bilinear(cy, out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      out.dx(y, x) = rx.at(y, x) * gain;
      out.dy(y, x) = ry.at(y, x) * gain;
    }
  }
  return out;
}

bool is_constant(const Image& img) { return max_value(img) - min_value(img) < 1e-7f; }

}  // namespace

void FlowParams::validate() const {
  if (pyramid_levels < 1) raise(ErrorCode::InvalidConfig, "pyramid_levels must be >= 1");
  if (pyramid_scale <= 0.0 || pyramid_scale >= 1.0) {
    raise(ErrorCode::InvalidConfig, "pyramid_scale must be in (0,1)");
  }
  if (iterations < 1) raise(ErrorCode::InvalidConfig, "iterations must be >= 1");
  if (window_size < 3 || window_size % 2 == 0) {
    raise(ErrorCode::InvalidConfig, "window_size must be odd and >= 3");
  }
  if (poly_n < 2 || poly_n % 2 == 0) raise(ErrorCode::InvalidConfig, "poly_n must be odd and >= 3");
  if (poly_sigma <= 0.0) raise(ErrorCode::InvalidConfig, "poly_sigma must be > 0");
}

FlowField estimate_flow(const Image& frame_a, const Image& frame_b, const FlowParams& params) {
  params.validate();
  if (!frame_a.same_shape(frame_b)) raise(ErrorCode::ShapeMismatch, "frame shapes differ");

  FlowField result(frame_a.h, frame_a.w);
  if (is_constant(frame_a) || is_constant(frame_b)) {
    result.degenerate = true;
    return result;
  }

  // Deepest usable pyramid level given the minimum size.
  int levels = 0;
  {
    double scale = 1.0;
    for (int k = 0; k < params.pyramid_levels; ++k) {
      scale *= params.pyramid_scale;
      if (frame_a.w * scale < kMinPyramidSize || frame_a.h * scale < kMinPyramidSize) break;
      levels = k + 1;
    }
  }

  FlowField fl;
  for (int k = levels; k >= 0; --k) {
    double scale = 1.0;
    for (int i = 0; i < k; ++i) scale *= params.pyramid_scale;

    const double sigma = (1.0 / scale - 1.0) * 0.5;
    const int smooth_sz = std::max(static_cast<int>(std::lround(sigma * 5.0)) | 1, 3);
    const double sigma_eff = sigma > 0.0 ? sigma : 0.8;

    const int lw = static_cast<int>(std::lround(frame_a.w * scale));
    const int lh = static_cast<int>(std::lround(frame_a.h * scale));

    if (fl.v.empty()) {
      fl = FlowField(lh, lw);
    } else {
      fl = resize_flow(fl, lh, lw, static_cast<float>(1.0 / params.pyramid_scale));
    }

    Mat5 expansions[2];
    const Image* imgs[2] = {&frame_a, &frame_b};
    for (int i = 0; i < 2; ++i) {
      Image smoothed = gaussian_blur(*imgs[i], sigma_eff, smooth_sz / 2);
      if (lw != frame_a.w || lh != frame_a.h) smoothed = resize_bilinear(smoothed, lh, lw);
      // The 2x2 solve regularizer below is calibrated for 8-bit intensity
      // magnitudes; bring [0,1] inputs onto that scale.
      for (auto& v : smoothed.v) v *= 255.f;
      expansions[i] = polynomial_expansion(smoothed, params.poly_n, params.poly_sigma);
    }

    Mat5 m = update_matrices(expansions[0], expansions[1], fl);
    for (int it = 0; it < params.iterations; ++it) {
      const Mat5 blurred = box_blur5(m, params.window_size / 2);
      solve_flow(blurred, fl);
      if (it + 1 < params.iterations) {
        m = update_matrices(expansions[0], expansions[1], fl);
      }
    }
  }
  result.v = std::move(fl.v);
  return result;
}

Image warp_image(const Image& frame, const FlowField& fl, float scale) {
  if (frame.h != fl.h || frame.w != fl.w) raise(ErrorCode::ShapeMismatch, "flow shape differs from frame");
  Image out(frame.h, frame.w);
  for (int y = 0; y < frame.h; ++y) {
    for (int x = 0; x < frame.w; ++x) {
      const float sy = static_cast<float>(y) + scale * fl.dy(y, x);
      const float sx = static_cast<float>(x) + scale * fl.dx(y, x);
      out.at(y, x) = sample_bilinear(frame, sy, sx);
    }
  }
  return out;
}

std::vector<Image> interpolate_pair(const Image& endpoint_a, const Image& endpoint_b, int gap,
                                    const FlowParams& params) {
  if (gap < 2) raise(ErrorCode::InvalidConfig, "gap must be >= 2");
  if (!endpoint_a.same_shape(endpoint_b)) raise(ErrorCode::ShapeMismatch, "endpoint shapes differ");

  const FlowField forward = estimate_flow(endpoint_a, endpoint_b, params);
  const FlowField backward = estimate_flow(endpoint_b, endpoint_a, params);

  std::vector<Image> frames;
  frames.reserve(static_cast<std::size_t>(gap) - 1);
  for (int k = 1; k < gap; ++k) {
    const float tau = static_cast<float>(k) / static_cast<float>(gap);
    const Image from_a = warp_image(endpoint_a, forward, tau);
    const Image from_b = warp_image(endpoint_b, backward, 1.f - tau);
    Image blend(endpoint_a.h, endpoint_a.w);
    for (std::size_t i = 0; i < blend.v.size(); ++i) {
      blend.v[i] = (1.f - tau) * from_a.v[i] + tau * from_b.v[i];
    }
    clamp01(blend);
    frames.push_back(std::move(blend));
  }
  return frames;
}

TrainingWindow sample_training_window(const data::CineClip& clip, int gap, std::uint64_t rng_seed,
                                      const FlowParams& params) {
  const int t = clip.frame_count();
  if (t < gap + 1) {
    raise(ErrorCode::ClipTooShort,
          "clip has " + std::to_string(t) + " frames, needs >= " + std::to_string(gap + 1));
  }
  if (gap < 4) raise(ErrorCode::InvalidConfig, "gap must be >= 4 to admit an interior triplet");

  Rng rng(rng_seed);
  TrainingWindow win;
  win.gap = gap;
  win.start_index = static_cast<int>(rng.uniform_int(0, t - gap - 1));
  // Triplet start over interior offsets that fit 3 consecutive interpolated
  // frames: 1..K-3.
  const int triplet_start = static_cast<int>(rng.uniform_int(1, gap - 3));
  win.triplet_offsets = {triplet_start, triplet_start + 1, triplet_start + 2};

  win.endpoint_a = clip.frames[static_cast<std::size_t>(win.start_index)];
  win.endpoint_b = clip.frames[static_cast<std::size_t>(win.start_index + gap)];
  win.interpolated = interpolate_pair(win.endpoint_a, win.endpoint_b, gap, params);
  for (int offset : win.triplet_offsets) {
    win.gt_frames.push_back(clip.frames[static_cast<std::size_t>(win.start_index + offset)]);
  }
  return win;
}

}  // namespace cinesr::flow
