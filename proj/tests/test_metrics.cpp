#include <doctest.h>

#include <cmath>

#include "cinesr/error.hpp"
#include "cinesr/metrics.hpp"
#include "cinesr/rng.hpp"

using namespace cinesr;
namespace fs = std::filesystem;

namespace {

Image noise_image(int n, std::uint64_t seed) {
  Rng rng(seed);
  Image img(n, n);
  for (auto& v : img.v) v = static_cast<float>(rng.uniform());
  return img;
}

Image textured(int n) {
  Image img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      img.at(y, x) = static_cast<float>(0.5 + 0.3 * std::sin(0.2 * x) * std::cos(0.17 * y) +
                                        0.15 * std::sin(0.08 * (x + 2 * y)));
    }
  }
  clamp01(img);
  return img;
}

Image flip_lr(const Image& img) {
  Image out(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) out.at(y, x) = img.at(y, img.w - 1 - x);
  }
  return out;
}

fs::path backbone_fixture() {
  const fs::path path = fs::temp_directory_path() / "cinesr_lpips_fixture.ckpt";
  metrics::write_random_backbone(path, 2024);
  return path;
}

}  // namespace

TEST_CASE("psnr of identical images is the infinity sentinel") {
  const Image img = textured(32);
  CHECK(std::isinf(metrics::psnr(img, img)));
}

TEST_CASE("psnr matches the closed form for constant images") {
  const Image a(16, 16, 0.0f);
  const Image b(16, 16, 0.5f);
  // MSE = 0.25 -> 10*log10(4) = 6.0206
  CHECK(metrics::psnr(a, b) == doctest::Approx(6.0206).epsilon(1e-4));
  const Image c(8, 16, 0.f);
  CHECK_THROWS_AS(metrics::psnr(a, c), Error);
}

TEST_CASE("psnr strictly decreases with noise amplitude") {
  const Image ref = textured(48);
  Rng rng(5);
  std::vector<float> noise(ref.v.size());
  for (auto& v : noise) v = static_cast<float>(rng.normal());
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.01, 0.03, 0.09}) {
    Image test = ref;
    for (std::size_t i = 0; i < test.v.size(); ++i) {
      test.v[i] = std::clamp(test.v[i] + static_cast<float>(amp) * noise[i], 0.f, 1.f);
    }
    const double p = metrics::psnr(ref, test);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim is exactly one for identical inputs and symmetric") {
  const Image img = textured(32);
  CHECK(metrics::ssim(img, img) == 1.0);

  const Image other = noise_image(32, 8);
  const double ab = metrics::ssim(img, other);
  const double ba = metrics::ssim(other, img);
  CHECK(std::fabs(ab - ba) < 1e-9);
}

TEST_CASE("ssim of independent uniform noise is near zero") {
  const Image a = noise_image(64, 1);
  const Image b = noise_image(64, 2);
  CHECK(metrics::ssim(a, b) < 0.1);
}

TEST_CASE("ssim requires at least the window size") {
  const Image small(8, 8, 0.5f);
  CHECK_THROWS_AS(metrics::ssim(small, small), Error);
  const Image a(16, 16, 0.5f);
  const Image b(16, 8, 0.5f);
  CHECK_THROWS_AS(metrics::ssim(a, b), Error);
}

TEST_CASE("psnr and ssim are invariant to simultaneous flips") {
  const Image a = textured(36);
  const Image b = noise_image(36, 9);
  CHECK(metrics::psnr(a, b) == metrics::psnr(flip_lr(a), flip_lr(b)));
  CHECK(metrics::ssim(a, b) == doctest::Approx(metrics::ssim(flip_lr(a), flip_lr(b))).epsilon(1e-12));
}

TEST_CASE("lpips backbone loads and satisfies the distance axioms") {
  const fs::path path = backbone_fixture();
  const auto backbone = metrics::LpipsBackbone::load(path);

  const Image a = textured(64);
  const Image b = noise_image(64, 3);
  CHECK(metrics::lpips(a, a, backbone) == 0.0);
  CHECK(metrics::lpips(a, b, backbone) > 0.0);
  CHECK(std::fabs(metrics::lpips(a, b, backbone) - metrics::lpips(b, a, backbone)) < 1e-6);
  fs::remove(path);
}

TEST_CASE("lpips is invariant to simultaneous flips on even sizes") {
  const fs::path path = backbone_fixture();
  const auto backbone = metrics::LpipsBackbone::load(path);
  const Image a = textured(64);
  const Image b = noise_image(64, 4);
  const double d1 = metrics::lpips(a, b, backbone);
  const double d2 = metrics::lpips(flip_lr(a), flip_lr(b), backbone);
  CHECK(std::fabs(d1 - d2) < 1e-6);
  fs::remove(path);
}

TEST_CASE("a missing backbone raises BackboneUnavailable") {
  try {
    metrics::LpipsBackbone::load("/nonexistent/backbone.ckpt");
    FAIL("expected BackboneUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackboneUnavailable);
  }
}

TEST_CASE("report aggregation equals the arithmetic mean of per-frame calls") {
  const Image ref = textured(32);
  std::vector<double> psnrs, ssims;
  metrics::MetricAccumulator acc;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    Image test = ref;
    Rng rng(s);
    for (auto& v : test.v) v = std::clamp(v + 0.05f * static_cast<float>(rng.normal()), 0.f, 1.f);
    const double p = metrics::psnr(ref, test);
    const double q = metrics::ssim(ref, test);
    psnrs.push_back(p);
    ssims.push_back(q);
    acc.add(p, q, std::nullopt);
  }
  const auto report = acc.report();
  CHECK(report.n_images == 4);
  CHECK(report.psnr_db == (psnrs[0] + psnrs[1] + psnrs[2] + psnrs[3]) / 4.0);
  CHECK(report.ssim == (ssims[0] + ssims[1] + ssims[2] + ssims[3]) / 4.0);
  CHECK(!report.lpips.has_value());

  metrics::MetricAccumulator empty;
  CHECK_THROWS_AS(empty.report(), Error);
}

TEST_CASE("lpips aggregation is marked absent when any frame lacks it") {
  metrics::MetricAccumulator acc;
  acc.add(30.0, 0.9, 0.5);
  acc.add(31.0, 0.92, std::nullopt);
  const auto report = acc.report();
  CHECK(!report.lpips.has_value());
}
