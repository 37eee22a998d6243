#include <doctest.h>

#include <cmath>

#include "cinesr/data_ingest.hpp"
#include "cinesr/error.hpp"
#include "cinesr/flow.hpp"

using namespace cinesr;

namespace {

// Smooth band-limited texture, optionally translated by (sx, sy) pixels.
Image textured(int n, double sx = 0.0, double sy = 0.0) {
  Image img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double xx = x - sx, yy = y - sy;
      img.at(y, x) = static_cast<float>(0.5 + 0.2 * std::sin(0.21 * xx + 0.13 * yy) +
                                        0.15 * std::sin(0.07 * xx - 0.31 * yy) +
                                        0.1 * std::sin(0.42 * xx + 0.05 * yy));
    }
  }
  clamp01(img);
  return img;
}

Image gaussian_dot(int n, double cx, double cy, double sigma = 2.5) {
  Image img(n, n, 0.05f);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      img.at(y, x) += static_cast<float>(0.9 * std::exp(-d2 / (2 * sigma * sigma)));
    }
  }
  clamp01(img);
  return img;
}

std::pair<double, double> interior_mean_flow(const flow::FlowField& f, int margin) {
  double sx = 0, sy = 0;
  std::int64_t n = 0;
  for (int y = margin; y < f.h - margin; ++y) {
    for (int x = margin; x < f.w - margin; ++x) {
      sx += f.dx(y, x);
      sy += f.dy(y, x);
      ++n;
    }
  }
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

double dot_centroid_x(const Image& img, float background = 0.05f) {
  double wsum = 0, xsum = 0;
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double v = img.at(y, x) - background;
      if (v > 0.1) {
        wsum += v;
        xsum += v * x;
      }
    }
  }
  return xsum / wsum;
}

}  // namespace

TEST_CASE("identical textured frames give near-zero flow") {
  const Image a = textured(64);
  const auto f = flow::estimate_flow(a, a, flow::FlowParams{});
  CHECK(f.h == 64);
  CHECK(f.w == 64);
  CHECK(f.v.size() == 64 * 64 * 2);
  float mx = 0;
  for (float v : f.v) mx = std::max(mx, std::fabs(v));
  CHECK(mx < 0.1f);
}

TEST_CASE("known translation is recovered within half a pixel") {
  const Image a = textured(64);
  const Image b = textured(64, 3.0, 0.0);
  const auto f = flow::estimate_flow(a, b, flow::FlowParams{});
  const auto [mx, my] = interior_mean_flow(f, 8);
  CHECK(std::fabs(mx - 3.0) < 0.5);
  CHECK(std::fabs(my - 0.0) < 0.5);
}

TEST_CASE("flow is approximately antisymmetric on translations") {
  const Image a = textured(64);
  const Image b = textured(64, 2.0, 1.0);
  const auto fab = flow::estimate_flow(a, b, flow::FlowParams{});
  const auto fba = flow::estimate_flow(b, a, flow::FlowParams{});
  const auto [ax, ay] = interior_mean_flow(fab, 8);
  const auto [bx, by] = interior_mean_flow(fba, 8);
  CHECK(std::fabs(ax + bx) < 0.5);
  CHECK(std::fabs(ay + by) < 0.5);
}

TEST_CASE("pyramid invariance: half-resolution flow doubles to full-resolution flow") {
  const Image a = textured(96);
  const Image b = textured(96, 2.0, 0.0);
  const Image a2 = resize_bilinear(a, 48, 48);
  const Image b2 = resize_bilinear(b, 48, 48);
  const auto f_full = flow::estimate_flow(a, b, flow::FlowParams{});
  const auto f_half = flow::estimate_flow(a2, b2, flow::FlowParams{});
  const auto [fx, fy] = interior_mean_flow(f_full, 10);
  const auto [hx, hy] = interior_mean_flow(f_half, 5);
  CHECK(std::fabs(2.0 * hx - fx) < 1.0);
  CHECK(std::fabs(2.0 * hy - fy) < 1.0);
}

TEST_CASE("constant frames yield the degenerate flag and zero flow") {
  const Image a(32, 32, 0.5f);
  const Image b = textured(32);
  const auto f = flow::estimate_flow(a, b, flow::FlowParams{});
  CHECK(f.degenerate);
  for (float v : f.v) CHECK(v == 0.f);
}

TEST_CASE("estimate_flow validates shapes and params") {
  const Image a = textured(32);
  const Image b = textured(48);
  CHECK_THROWS_AS(flow::estimate_flow(a, b, flow::FlowParams{}), Error);
  flow::FlowParams bad;
  bad.pyramid_scale = 1.5;
  CHECK_THROWS_AS(flow::estimate_flow(a, a, bad), Error);
  bad = flow::FlowParams{};
  bad.window_size = 4;
  CHECK_THROWS_AS(flow::estimate_flow(a, a, bad), Error);
}

TEST_CASE("warp with zero scale is the identity") {
  const Image a = textured(32);
  flow::FlowField f(32, 32);
  for (auto& v : f.v) v = 5.f;
  const Image w = flow::warp_image(a, f, 0.f);
  CHECK(w.v == a.v);
}

TEST_CASE("warp recovers an integer translation exactly in the interior") {
  const Image a = textured(48);
  const Image b = textured(48, 1.0, 0.0);  // b(x) = a(x-1)
  flow::FlowField f(48, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) f.dx(y, x) = 1.f;
  }
  // warp(b) samples b(x+1) = a(x)
  const Image w = flow::warp_image(b, f, 1.f);
  for (int y = 2; y < 46; ++y) {
    for (int x = 2; x < 45; ++x) {
      CHECK(std::fabs(w.at(y, x) - a.at(y, x)) < 1e-6);
    }
  }
}

TEST_CASE("warp replicates the border for out-of-range flow") {
  const Image a = textured(24);
  flow::FlowField f(24, 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      f.dx(y, x) = 1000.f;  // far beyond the right edge
      f.dy(y, x) = 0.f;
    }
  }
  const Image w = flow::warp_image(a, f, 1.f);
  for (int y = 0; y < 24; ++y) {
    CHECK(w.at(y, 5) == a.at(y, 23));
  }
  flow::FlowField bad(12, 12);
  CHECK_THROWS_AS(flow::warp_image(a, bad, 1.f), Error);
}

TEST_CASE("interpolating identical endpoints reproduces them") {
  const Image a = textured(48);
  const auto frames = flow::interpolate_pair(a, a, 8, flow::FlowParams{});
  REQUIRE(frames.size() == 7);
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.v.size(); ++i) {
      CHECK(std::fabs(f.v[i] - a.v[i]) < 1e-4);
    }
  }
}

TEST_CASE("endpoint consistency at tau = 0 and tau = 1") {
  // Extending the tau grid to the endpoints must return the endpoints:
  // warp with scale 0 is exact, so check the blend formula directly.
  const Image a = textured(48);
  const Image b = textured(48, 2.0, -1.0);
  const auto fab = flow::estimate_flow(a, b, flow::FlowParams{});
  const auto fba = flow::estimate_flow(b, a, flow::FlowParams{});
  const Image at_zero = flow::warp_image(a, fab, 0.f);   // tau=0 term
  const Image at_one = flow::warp_image(b, fba, 0.f);    // tau=1 term
  CHECK(at_zero.v == a.v);
  CHECK(at_one.v == b.v);
}

TEST_CASE("moving dot midpoint lands within one pixel of the analytic centroid") {
  const Image d0 = gaussian_dot(64, 10, 32);
  const Image d1 = gaussian_dot(64, 18, 32);
  const auto frames = flow::interpolate_pair(d0, d1, 8, flow::FlowParams{});
  REQUIRE(frames.size() == 7);
  const double cx = dot_centroid_x(frames[3]);  // k=4, tau=1/2
  CHECK(std::fabs(cx - 14.0) <= 1.0);
  for (const auto& f : frames) {
    CHECK(min_value(f) >= 0.f);
    CHECK(max_value(f) <= 1.f);
  }
}

TEST_CASE("sample_training_window draws a valid 9-frame window") {
  data::PhantomConfig pc;
  pc.size = 48;
  pc.period = 20;
  pc.base_radius = 13;
  const auto clip = data::synth_phantom_clip(pc, 30, 21);

  const auto win = flow::sample_training_window(clip, 8, 99, flow::FlowParams{});
  CHECK(win.gap == 8);
  CHECK(win.start_index >= 0);
  CHECK(win.start_index <= 21);
  CHECK(win.interpolated.size() == 7);
  CHECK(win.gt_frames.size() == 3);
  CHECK(win.triplet_offsets[1] == win.triplet_offsets[0] + 1);
  CHECK(win.triplet_offsets[2] == win.triplet_offsets[0] + 2);
  CHECK(win.triplet_offsets[0] >= 1);
  CHECK(win.triplet_offsets[2] <= 7);

  // Ground truth comes from the clip, not from interpolation.
  for (int i = 0; i < 3; ++i) {
    const auto& expect = clip.frames[static_cast<std::size_t>(win.start_index + win.triplet_offsets[i])];
    CHECK(win.gt_frames[static_cast<std::size_t>(i)].v == expect.v);
  }
  CHECK(win.endpoint_a.v == clip.frames[static_cast<std::size_t>(win.start_index)].v);
  CHECK(win.endpoint_b.v == clip.frames[static_cast<std::size_t>(win.start_index + 8)].v);
}

TEST_CASE("sample_training_window is deterministic and excludes endpoints") {
  data::PhantomConfig pc;
  pc.size = 32;
  pc.period = 12;
  pc.base_radius = 9;
  const auto clip = data::synth_phantom_clip(pc, 16, 4);

  const auto w1 = flow::sample_training_window(clip, 8, 7, flow::FlowParams{});
  const auto w2 = flow::sample_training_window(clip, 8, 7, flow::FlowParams{});
  CHECK(w1.start_index == w2.start_index);
  CHECK(w1.triplet_offsets == w2.triplet_offsets);
  for (std::size_t i = 0; i < w1.interpolated.size(); ++i) {
    CHECK(w1.interpolated[i].v == w2.interpolated[i].v);
  }

  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto w = flow::sample_training_window(clip, 8, seed, flow::FlowParams{});
    CHECK(w.triplet_offsets[0] >= 1);
    CHECK(w.triplet_offsets[2] <= 7);
  }
}

TEST_CASE("sample_training_window requires K+1 frames") {
  data::PhantomConfig pc;
  pc.size = 32;
  pc.period = 12;
  pc.base_radius = 9;
  const auto clip = data::synth_phantom_clip(pc, 8, 4);
  CHECK_THROWS_AS(flow::sample_training_window(clip, 8, 1, flow::FlowParams{}), Error);
}
