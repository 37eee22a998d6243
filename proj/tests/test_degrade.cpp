#include <doctest.h>

#include <cmath>

#include "cinesr/data_ingest.hpp"
#include "cinesr/degrade.hpp"
#include "cinesr/error.hpp"

using namespace cinesr;

namespace {

Image smooth_fixture(int n) {
  Image img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      img.at(y, x) = static_cast<float>(0.5 + 0.25 * std::sin(0.05 * x) * std::cos(0.06 * y) +
                                        0.15 * std::sin(0.03 * (x + y)));
    }
  }
  clamp01(img);
  return img;
}

std::vector<Image> phantom_triplet(int size) {
  data::PhantomConfig pc;
  pc.size = size;
  pc.period = 12;
  pc.base_radius = 0.3 * size;
  const auto clip = data::synth_phantom_clip(pc, 4, 9);
  return {clip.frames[0], clip.frames[1], clip.frames[2]};
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    m = std::max(m, static_cast<double>(std::fabs(a.v[i] - b.v[i])));
  }
  return m;
}

}  // namespace

TEST_CASE("bicubic resize hits the contracted shapes") {
  const Image img = smooth_fixture(256);
  const Image down = degrade::bicubic_resize(img, 0.25);
  CHECK(down.h == 64);
  CHECK(down.w == 64);
  const Image odd = degrade::bicubic_resize_to(img, 100, 180);
  CHECK(odd.h == 100);
  CHECK(odd.w == 180);
}

TEST_CASE("bicubic resize at scale one is the identity") {
  const Image img = smooth_fixture(48);
  const Image same = degrade::bicubic_resize(img, 1.0);
  CHECK(max_abs_diff(img, same) < 1e-6);
}

TEST_CASE("bicubic resize preserves constants at any scale") {
  const Image img(37, 53, 0.371f);
  for (double scale : {0.25, 0.5, 0.77, 1.3, 2.0}) {
    const Image out = degrade::bicubic_resize(img, scale);
    for (float v : out.v) CHECK(v == doctest::Approx(0.371f).epsilon(1e-6));
  }
}

TEST_CASE("bicubic resize rejects invalid scales") {
  const Image img = smooth_fixture(16);
  CHECK_THROWS_AS(degrade::bicubic_resize(img, 0.0), Error);
  CHECK_THROWS_AS(degrade::bicubic_resize(img, -1.0), Error);
  CHECK_THROWS_AS(degrade::bicubic_resize(img, 0.01), Error);
}

TEST_CASE("degrade_bicubic maps a 256 triplet to 64") {
  const auto frames = phantom_triplet(256);
  const auto lr = degrade::degrade_bicubic(frames, 4);
  REQUIRE(lr.size() == 3);
  for (const auto& f : lr) {
    CHECK(f.h == 64);
    CHECK(f.w == 64);
  }
  const auto same = degrade::degrade_bicubic(frames, 1);
  CHECK(max_abs_diff(same[0], frames[0]) < 1e-6);

  const std::vector<Image> bad = {smooth_fixture(30)};
  CHECK_THROWS_AS(degrade::degrade_bicubic(bad, 4), Error);
}

TEST_CASE("two half-scale passes match one quarter-scale pass on smooth fixtures") {
  Image img(128, 128);
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) {
      img.at(y, x) = static_cast<float>(0.5 + 0.3 * std::sin(0.02 * x) * std::cos(0.024 * y));
    }
  }
  const std::vector<Image> frames = {img};
  const auto once = degrade::degrade_bicubic(frames, 4);
  const auto twice = degrade::degrade_bicubic(degrade::degrade_bicubic(frames, 2), 2);
  CHECK(max_abs_diff(once[0], twice[0]) < 1e-3);
}

TEST_CASE("degrade_realistic is deterministic given the seed") {
  const auto frames = phantom_triplet(64);
  degrade::DegradationConfig cfg;
  const auto a = degrade::degrade_realistic(frames, cfg, 31);
  const auto b = degrade::degrade_realistic(frames, cfg, 31);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].v == b[i].v);
  const auto c = degrade::degrade_realistic(frames, cfg, 32);
  bool any_diff = false;
  for (std::size_t i = 0; i < 3; ++i) any_diff = any_diff || a[i].v != c[i].v;
  CHECK(any_diff);
}

TEST_CASE("all-probabilities-zero collapses to the bicubic pipeline") {
  const auto frames = phantom_triplet(64);
  degrade::DegradationConfig cfg;
  cfg.second_order = false;
  cfg.blur_prob = cfg.resize_prob = cfg.noise_prob = cfg.jpeg_prob = 0.0;
  cfg.second_blur_prob = 0.0;
  cfg.sinc_prob = 0.0;
  const auto realistic = degrade::degrade_realistic(frames, cfg, 5);
  const auto bicubic = degrade::degrade_bicubic(frames, cfg.scale);
  for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs_diff(realistic[i], bicubic[i]) < 1e-6);
}

TEST_CASE("realistic degradation keeps the target shape and range") {
  const auto frames = phantom_triplet(256);
  degrade::DegradationConfig cfg;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto lr = degrade::degrade_realistic(frames, cfg, seed);
    for (const auto& f : lr) {
      CHECK(f.h == 64);
      CHECK(f.w == 64);
      CHECK(all_finite(f));
      CHECK(min_value(f) >= 0.f);
      CHECK(max_value(f) <= 1.f);
    }
  }
}

TEST_CASE("random draws are shared across the frames of one call") {
  // Degrading a triplet of identical frames must keep them identical,
  // i.e. the noise fields and all stage draws match across frames.
  const Image base = smooth_fixture(64);
  const std::vector<Image> frames = {base, base, base};
  degrade::DegradationConfig cfg;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto lr = degrade::degrade_realistic(frames, cfg, seed);
    CHECK(lr[0].v == lr[1].v);
    CHECK(lr[1].v == lr[2].v);
  }
}

TEST_CASE("degraded energy stays near the input mean") {
  const auto frames = phantom_triplet(64);
  degrade::DegradationConfig cfg;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto lr = degrade::degrade_realistic(frames, cfg, seed);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::fabs(mean_value(lr[i]) - mean_value(frames[i])) < 0.15);
    }
  }
}

TEST_CASE("mode mismatch is rejected") {
  const auto frames = phantom_triplet(64);
  degrade::DegradationConfig cfg;
  cfg.mode = degrade::DegradationMode::bicubic_only;
  CHECK_THROWS_AS(degrade::degrade_realistic(frames, cfg, 1), Error);
}

TEST_CASE("config invariants are validated") {
  degrade::DegradationConfig cfg;
  cfg.blur_sigma_range = {2.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = degrade::DegradationConfig{};
  cfg.blur_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = degrade::DegradationConfig{};
  cfg.blur_kernel_sizes = {8};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = degrade::DegradationConfig{};
  cfg.scale = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("jpeg round trip distorts more at lower quality") {
  const Image img = smooth_fixture(64);
  const Image q95 = degrade::jpeg_roundtrip(img, 95);
  const Image q30 = degrade::jpeg_roundtrip(img, 30);
  double e95 = 0, e30 = 0;
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    e95 += std::fabs(q95.v[i] - img.v[i]);
    e30 += std::fabs(q30.v[i] - img.v[i]);
  }
  CHECK(e30 > e95);
  CHECK(max_abs_diff(img, degrade::jpeg_roundtrip(img, 100)) < 0.01);
  CHECK(degrade::jpeg_roundtrip(img, 30).v == degrade::jpeg_roundtrip(img, 30).v);
}

TEST_CASE("sinc kernel is normalized and preserves constants") {
  const auto k = degrade::sinc_kernel(11, 2.0);
  double sum = 0;
  for (float v : k) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

  const Image img(20, 20, 0.4f);
  const Image out = degrade::convolve2d_replicate(img, k, 11);
  for (float v : out.v) CHECK(v == doctest::Approx(0.4f).epsilon(1e-5));
}
