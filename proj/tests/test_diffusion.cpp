#include <doctest.h>

#include <cmath>

#include "cinesr/diffusion.hpp"
#include "cinesr/error.hpp"

using namespace cinesr;
using nn::Tensord;

namespace {

Tensord randu(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensord t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("schedule endpoints are exact and the sequence is strictly increasing") {
  const auto s = diffusion::build_schedule(15, 2.0, 0.3, 0.04, 0.999);
  CHECK(s.eta.size() == 15);
  CHECK(s.eta.front() == 0.04);
  CHECK(s.eta.back() == 0.999);
  for (std::size_t i = 1; i < s.eta.size(); ++i) CHECK(s.eta[i] > s.eta[i - 1]);

  const auto s2 = diffusion::build_schedule(2, 1.0, 0.3, 0.04, 0.999);
  CHECK(s2.eta == std::vector<double>{0.04, 0.999});
}

TEST_CASE("p = 1 spaces log sqrt(eta) uniformly") {
  const auto s = diffusion::build_schedule(8, 1.0, 1.0, 0.05, 0.9);
  std::vector<double> logs;
  for (double e : s.eta) logs.push_back(std::log(std::sqrt(e)));
  const double step = logs[1] - logs[0];
  for (std::size_t i = 1; i < logs.size(); ++i) {
    CHECK(logs[i] - logs[i - 1] == doctest::Approx(step).epsilon(1e-9));
  }
}

TEST_CASE("schedule parameters are validated") {
  CHECK_THROWS_AS(diffusion::build_schedule(1, 2.0, 0.3, 0.04, 0.999), Error);
  CHECK_THROWS_AS(diffusion::build_schedule(15, 0.0, 0.3, 0.04, 0.999), Error);
  CHECK_THROWS_AS(diffusion::build_schedule(15, 2.0, 0.3, 0.0, 0.999), Error);
  CHECK_THROWS_AS(diffusion::build_schedule(15, 2.0, 0.3, 0.9, 0.5), Error);
  CHECK_THROWS_AS(diffusion::build_schedule(15, 2.0, 0.3, 0.04, 1.5), Error);
}

TEST_CASE("forward_sample without noise is the linear residual shift") {
  const auto s = diffusion::build_schedule(5, 2.0, 0.3, 0.04, 0.999);
  const Tensord x0 = randu({2, 3, 3}, 1);
  const Tensord y = randu({2, 3, 3}, 2);
  const Tensord zero({2, 3, 3});
  for (int t = 1; t <= 5; ++t) {
    const Tensord xt = diffusion::forward_sample(x0, y, t, s, zero);
    const double eta = s.eta_at(t);
    for (std::size_t i = 0; i < xt.data.size(); ++i) {
      CHECK(xt.data[i] == doctest::Approx(x0.data[i] + eta * (y.data[i] - x0.data[i])).epsilon(1e-12));
    }
  }
  // zero residual: y == x0 pins x_t to x0 for every t
  const Tensord same = diffusion::forward_sample(x0, x0, 3, s, zero);
  CHECK(same.data == x0.data);
}

TEST_CASE("forward_sample validates steps and shapes") {
  const auto s = diffusion::build_schedule(5, 2.0, 0.3, 0.04, 0.999);
  const Tensord x0 = randu({2, 2}, 1);
  const Tensord zero({2, 2});
  CHECK_THROWS_AS(diffusion::forward_sample(x0, x0, 0, s, zero), Error);
  CHECK_THROWS_AS(diffusion::forward_sample(x0, x0, 6, s, zero), Error);
  const Tensord bad({3, 2});
  CHECK_THROWS_AS(diffusion::forward_sample(x0, bad, 1, s, zero), Error);
}

TEST_CASE("forward_sample is affine in (x0, y, noise)") {
  const auto s = diffusion::build_schedule(6, 1.5, 0.4, 0.05, 0.99);
  const Tensord x0a = randu({10}, 3), x0b = randu({10}, 4);
  const Tensord ya = randu({10}, 5), yb = randu({10}, 6);
  const Tensord na = randu({10}, 7), nb = randu({10}, 8);
  const double wa = 0.3, wb = 0.7;
  for (int t : {1, 3, 6}) {
    const Tensord lhs = diffusion::forward_sample<double>(
        x0a * wa + x0b * wb, ya * wa + yb * wb, t, s, na * wa + nb * wb);
    const Tensord fa = diffusion::forward_sample(x0a, ya, t, s, na);
    const Tensord fb = diffusion::forward_sample(x0b, yb, t, s, nb);
    for (std::size_t i = 0; i < lhs.data.size(); ++i) {
      CHECK(lhs.data[i] == doctest::Approx(wa * fa.data[i] + wb * fb.data[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("forward_sample empirical moments match the analytic marginal") {
  const auto s = diffusion::build_schedule(5, 1.3, 0.5, 0.06, 0.98);
  const Tensord x0 = randu({4, 4}, 11);
  const Tensord y = randu({4, 4}, 12);
  const int n_draws = 10000;
  const int t = 3;
  const double eta = s.eta_at(t);
  const double sigma = s.kappa * std::sqrt(eta);

  std::vector<double> sum(x0.data.size(), 0.0), sum2(x0.data.size(), 0.0);
  Rng rng(99);
  for (int d = 0; d < n_draws; ++d) {
    const Tensord noise = diffusion::randn_like(x0, rng);
    const Tensord xt = diffusion::forward_sample(x0, y, t, s, noise);
    for (std::size_t i = 0; i < xt.data.size(); ++i) {
      sum[i] += xt.data[i];
      sum2[i] += xt.data[i] * xt.data[i];
    }
  }
  const double mean_tol = 3.0 * sigma / std::sqrt(static_cast<double>(n_draws));
  double pooled_var = 0.0;
  for (std::size_t i = 0; i < x0.data.size(); ++i) {
    const double mean = sum[i] / n_draws;
    const double expect = x0.data[i] + eta * (y.data[i] - x0.data[i]);
    CHECK(std::fabs(mean - expect) < mean_tol);
    pooled_var += sum2[i] / n_draws - mean * mean;
  }
  pooled_var /= static_cast<double>(x0.data.size());
  CHECK(std::fabs(pooled_var - sigma * sigma) / (sigma * sigma) < 0.05);
}

TEST_CASE("posterior_step is the identity prediction at t = 1") {
  const auto s = diffusion::build_schedule(5, 2.0, 0.3, 0.04, 0.999);
  const Tensord x_t = randu({3, 3}, 1);
  const Tensord x0_hat = randu({3, 3}, 2);
  const Tensord y = randu({3, 3}, 3);
  const Tensord noise = randu({3, 3}, 4);
  const Tensord out = diffusion::posterior_step(x_t, x0_hat, y, 1, s, noise);
  CHECK(out.data == x0_hat.data);
  CHECK_THROWS_AS(diffusion::posterior_step(x_t, x0_hat, y, 0, s, noise), Error);
  CHECK_THROWS_AS(diffusion::posterior_step(x_t, x0_hat, y, 6, s, noise), Error);
}

TEST_CASE("noiseless two-step posterior reproduces the forward mean") {
  // Feed x_T from the deterministic forward pass and step back with the
  // true x0: the result must equal the forward mean at t-1.
  const auto s = diffusion::build_schedule(2, 2.0, 0.3, 0.04, 0.999);
  const Tensord x0 = randu({4}, 5);
  const Tensord y = randu({4}, 6);
  const Tensord zero({4});
  const Tensord x2 = diffusion::forward_sample(x0, y, 2, s, zero);
  const Tensord x1 = diffusion::posterior_step(x2, x0, y, 2, s, zero);
  const double eta1 = s.eta_at(1);
  for (std::size_t i = 0; i < x1.data.size(); ++i) {
    CHECK(x1.data[i] == doctest::Approx(x0.data[i] + eta1 * (y.data[i] - x0.data[i])).epsilon(1e-10));
  }
}

TEST_CASE("two-path marginal consistency holds for every step of a T=5 schedule") {
  const auto s = diffusion::build_schedule(5, 1.1, 0.4, 0.05, 0.95);
  const Tensord x0 = randu({3, 3}, 21);
  const Tensord y = randu({3, 3}, 22);
  const int n_draws = 10000;

  for (int t = 2; t <= 5; ++t) {
    Rng rng(331 + static_cast<std::uint64_t>(t));
    std::vector<double> sum(x0.data.size(), 0.0), sum2(x0.data.size(), 0.0);
    for (int d = 0; d < n_draws; ++d) {
      const Tensord eps1 = diffusion::randn_like(x0, rng);
      const Tensord x_t = diffusion::forward_sample(x0, y, t, s, eps1);
      const Tensord eps2 = diffusion::randn_like(x0, rng);
      const Tensord x_prev = diffusion::posterior_step(x_t, x0, y, t, s, eps2);
      for (std::size_t i = 0; i < x_prev.data.size(); ++i) {
        sum[i] += x_prev.data[i];
        sum2[i] += x_prev.data[i] * x_prev.data[i];
      }
    }
    const double eta_p = s.eta_at(t - 1);
    const double var_expect = s.kappa * s.kappa * eta_p;
    const double mean_tol = 3.0 * std::sqrt(var_expect / n_draws);
    double pooled_var = 0.0;
    for (std::size_t i = 0; i < x0.data.size(); ++i) {
      const double mean = sum[i] / n_draws;
      const double expect = x0.data[i] + eta_p * (y.data[i] - x0.data[i]);
      CHECK(std::fabs(mean - expect) < mean_tol);
      pooled_var += sum2[i] / n_draws - mean * mean;
    }
    pooled_var /= static_cast<double>(x0.data.size());
    CHECK(std::fabs(pooled_var - var_expect) / var_expect < 0.05);
  }
}

TEST_CASE("training loss is zero for the oracle and delta^2 for a shifted oracle") {
  const auto s = diffusion::build_schedule(5, 2.0, 0.3, 0.04, 0.999);
  const Tensord x0 = randu({2, 4}, 31);
  const Tensord y = randu({2, 4}, 32);
  const Tensord cond = randu({2, 4}, 33);
  const Tensord noise = randu({2, 4}, 34);

  const diffusion::DenoiserFn<double> oracle = [&](const Tensord&, const Tensord&, int) { return x0; };
  CHECK(diffusion::training_loss(oracle, x0, y, cond, 3, s, noise) == 0.0);

  const double delta = 0.37;
  const diffusion::DenoiserFn<double> shifted = [&](const Tensord&, const Tensord&, int) {
    Tensord out = x0;
    for (auto& v : out.data) v += delta;
    return out;
  };
  CHECK(diffusion::training_loss(shifted, x0, y, cond, 3, s, noise) ==
        doctest::Approx(delta * delta).epsilon(1e-12));

  // Gradient with respect to the prediction: numeric check of the MSE path.
  Tensord dpred;
  diffusion::training_loss(shifted, x0, y, cond, 3, s, noise, &dpred);
  for (std::size_t i = 0; i < dpred.data.size(); ++i) {
    CHECK(dpred.data[i] == doctest::Approx(2.0 * delta / static_cast<double>(x0.numel())).epsilon(1e-12));
  }
}

TEST_CASE("sampler makes exactly T denoiser evaluations and dumps 5 snapshots") {
  const auto s = diffusion::build_schedule(15, 2.0, 0.3, 0.04, 0.999);
  const Tensord y = randu({2, 4, 4}, 41);
  int evals = 0;
  const diffusion::DenoiserFn<double> f = [&](const Tensord& x_t, const Tensord&, int) {
    ++evals;
    return x_t;
  };
  diffusion::SampleOptions opts;
  opts.record_trajectory = true;
  const auto result = diffusion::sample(f, y, y, s, 7, opts);
  CHECK(evals == 15);
  CHECK(result.denoiser_evaluations == 15);
  CHECK(result.trajectory.size() == 5);
}

TEST_CASE("oracle denoiser with tiny noise recovers the target") {
  const auto s = diffusion::build_schedule(15, 1e-4, 0.3, 0.04, 0.999);
  const Tensord x0_true = randu({2, 4, 4}, 51);
  const Tensord y = randu({2, 4, 4}, 52);
  const diffusion::DenoiserFn<double> oracle = [&](const Tensord&, const Tensord&, int) {
    return x0_true;
  };
  const auto result = diffusion::sample(oracle, y, y, s, 13);
  double max_err = 0;
  for (std::size_t i = 0; i < x0_true.data.size(); ++i) {
    max_err = std::max(max_err, std::fabs(result.x0.data[i] - x0_true.data[i]));
  }
  CHECK(max_err < 1e-2);
}

TEST_CASE("sampler is deterministic given the seed") {
  const auto s = diffusion::build_schedule(15, 2.0, 0.3, 0.04, 0.999);
  const Tensord y = randu({1, 3, 3}, 61);
  const diffusion::DenoiserFn<double> f = [&](const Tensord& x_t, const Tensord&, int) {
    Tensord out = x_t;
    for (auto& v : out.data) v *= 0.9;
    return out;
  };
  const auto a = diffusion::sample(f, y, y, s, 5);
  const auto b = diffusion::sample(f, y, y, s, 5);
  CHECK(a.x0.data == b.x0.data);
  const auto c = diffusion::sample(f, y, y, s, 6);
  CHECK(a.x0.data != c.x0.data);
}

TEST_CASE("identity-of-y denoiser converges to y as kappa vanishes") {
  const Tensord y = randu({1, 4, 4}, 71);
  const diffusion::DenoiserFn<double> f = [&](const Tensord&, const Tensord&, int) { return y; };
  const auto s = diffusion::build_schedule(5, 1e-8, 0.3, 0.04, 0.999);
  const auto result = diffusion::sample(f, y, y, s, 3);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    CHECK(result.x0.data[i] == doctest::Approx(y.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("latent stack shapes flow through the process end to end") {
  // 3 frames of a 256-pixel image at f=4 and c=3 concatenate to 64x64x9;
  // the process functions must preserve that shape.
  const auto s = diffusion::build_schedule(4, 2.0, 0.3, 0.04, 0.999);
  const Tensord x0 = randu({1, 9, 64, 64}, 81);
  const Tensord y = randu({1, 9, 64, 64}, 82);
  Rng rng(83);
  const Tensord noise = diffusion::randn_like(x0, rng);
  const Tensord xt = diffusion::forward_sample(x0, y, 2, s, noise);
  CHECK(xt.shape == std::vector<int>{1, 9, 64, 64});
  const Tensord prev = diffusion::posterior_step(xt, x0, y, 2, s, noise);
  CHECK(prev.shape == xt.shape);
}
