#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cinesr/data_ingest.hpp"
#include "cinesr/image.hpp"

namespace cinesr::flow {

// Dense displacement field, (dx, dy) interleaved per pixel, in pixels,
// mapping source toward target.
struct FlowField {
  int h = 0;
  int w = 0;
  std::vector<float> v;  // 2 * h * w
  bool degenerate = false;

  FlowField() = default;
  FlowField(int height, int width)
      : h(height), w(width), v(static_cast<std::size_t>(height) * width * 2, 0.f) {}

  float& dx(int y, int x) { return v[(static_cast<std::size_t>(y) * w + x) * 2]; }
  float& dy(int y, int x) { return v[(static_cast<std::size_t>(y) * w + x) * 2 + 1]; }
  float dx(int y, int x) const { return v[(static_cast<std::size_t>(y) * w + x) * 2]; }
  float dy(int y, int x) const { return v[(static_cast<std::size_t>(y) * w + x) * 2 + 1]; }
};

struct FlowParams {
  int pyramid_levels = 3;
  double pyramid_scale = 0.5;
  int window_size = 15;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.1;

  void validate() const;  // raises InvalidConfig
};

struct TrainingWindow {
  int start_index = 0;
  int gap = 8;  // K
  Image endpoint_a;
  Image endpoint_b;
  std::vector<Image> interpolated;        // K-1 frames, window offsets 1..K-1
  std::array<int, 3> triplet_offsets{};   // consecutive, within 1..K-1
  std::vector<Image> gt_frames;           // originals at start_index + offset
};

// Dense Farneback flow: per-pixel quadratic fits refined coarse-to-fine.
// A constant input frame gives zero flow with the degenerate flag set.
FlowField estimate_flow(const Image& frame_a, const Image& frame_b, const FlowParams& params);

// Backward warp with bilinear sampling and border replication:
// out(p) = frame(p + scale * flow(p)).
Image warp_image(const Image& frame, const FlowField& flow, float scale);

// Bidirectional flow interpolation of the K-1 interior frames at tau = k/K:
// (1-tau) * warp(a, F_ab, tau) + tau * warp(b, F_ba, 1-tau), clamped to [0,1].
std::vector<Image> interpolate_pair(const Image& endpoint_a, const Image& endpoint_b, int gap,
                                    const FlowParams& params);

// Uniformly places a (K+1)-frame window in the clip, interpolates its
// interior, and picks 3 consecutive interior offsets; ground-truth frames
// are copied from the original clip. Deterministic given seed.
TrainingWindow sample_training_window(const data::CineClip& clip, int gap, std::uint64_t rng_seed,
                                      const FlowParams& params);

}  // namespace cinesr::flow
