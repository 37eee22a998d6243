#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cinesr/error.hpp"
#include "cinesr/nn/tensor.hpp"
#include "cinesr/rng.hpp"

namespace cinesr::diffusion {

// Monotone shifting sequence eta_1..eta_T with noise scale kappa. sqrt(eta)
// interpolates geometrically from sqrt(eta_min) to sqrt(eta_max) under the
// sharpness warp w_t = ((t-1)/(T-1))^p.
struct Schedule {
  int T = 15;
  double kappa = 2.0;
  double p = 0.3;
  std::vector<double> eta;  // eta[t-1] = eta_t, strictly increasing

  double eta_at(int t) const { return eta[static_cast<std::size_t>(t - 1)]; }
  // alpha_t = eta_t - eta_{t-1}, with eta_0 taken as 0 for t = 1.
  double alpha_at(int t) const { return t == 1 ? eta[0] : eta_at(t) - eta_at(t - 1); }
};

Schedule build_schedule(int T, double kappa, double p, double eta_min, double eta_max);

// x_t = x0 + eta_t * (y - x0) + kappa * sqrt(eta_t) * noise
template <typename S>
nn::Tensor<S> forward_sample(const nn::Tensor<S>& x0, const nn::Tensor<S>& y, int t,
                             const Schedule& schedule, const nn::Tensor<S>& noise) {
  if (!x0.same_shape(y) || !x0.same_shape(noise)) {
    raise(ErrorCode::ShapeMismatch, "forward_sample operands differ in shape");
  }
  if (t < 1 || t > schedule.T) raise(ErrorCode::StepOutOfRange, "t=" + std::to_string(t));
  const S eta = static_cast<S>(schedule.eta_at(t));
  const S sig = static_cast<S>(schedule.kappa * std::sqrt(schedule.eta_at(t)));
  nn::Tensor<S> out(x0.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = x0.data[i] + eta * (y.data[i] - x0.data[i]) + sig * noise.data[i];
  }
  return out;
}

// Reverse transition toward t-1; derived from the forward marginals. At
// t = 1 the step is deterministic and returns the prediction itself.
template <typename S>
nn::Tensor<S> posterior_step(const nn::Tensor<S>& x_t, const nn::Tensor<S>& x0_hat,
                             const nn::Tensor<S>& y, int t, const Schedule& schedule,
                             const nn::Tensor<S>& noise) {
  if (!x_t.same_shape(x0_hat) || !x_t.same_shape(noise)) {
    raise(ErrorCode::ShapeMismatch, "posterior_step operands differ in shape");
  }
  if (t < 1 || t > schedule.T) raise(ErrorCode::StepOutOfRange, "t=" + std::to_string(t));
  if (t == 1) return x0_hat;
  (void)y;  // the transition depends on y only through x_t and x0_hat
  const double eta_t = schedule.eta_at(t);
  const double eta_p = schedule.eta_at(t - 1);
  const double alpha = eta_t - eta_p;
  const S a = static_cast<S>(eta_p / eta_t);
  const S b = static_cast<S>(alpha / eta_t);
  const S sig = static_cast<S>(schedule.kappa * std::sqrt((eta_p / eta_t) * alpha));
  nn::Tensor<S> out(x_t.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = a * x_t.data[i] + b * x0_hat.data[i] + sig * noise.data[i];
  }
  return out;
}

template <typename S>
nn::Tensor<S> randn_like(const nn::Tensor<S>& ref, Rng& rng) {
  nn::Tensor<S> out(ref.shape);
  for (auto& v : out.data) v = static_cast<S>(rng.normal());
  return out;
}

// The denoiser contract: f(x_t, cond, t) -> x0_hat, same shape as x_t.
template <typename S>
using DenoiserFn = std::function<nn::Tensor<S>(const nn::Tensor<S>&, const nn::Tensor<S>&, int)>;

// MSE between f(forward_sample(x0, y, t, noise), cond, t) and x0.
template <typename S>
S training_loss(const DenoiserFn<S>& f, const nn::Tensor<S>& x0, const nn::Tensor<S>& y,
                const nn::Tensor<S>& cond, int t, const Schedule& schedule,
                const nn::Tensor<S>& noise, nn::Tensor<S>* dpred = nullptr) {
  const nn::Tensor<S> x_t = forward_sample(x0, y, t, schedule, noise);
  const nn::Tensor<S> pred = f(x_t, cond, t);
  if (!pred.same_shape(x0)) raise(ErrorCode::ShapeMismatch, "denoiser output shape differs from x0");
  return nn::mse_loss(pred, x0, dpred);
}

struct SampleOptions {
  bool record_trajectory = false;
  // Normalized reverse-time fractions at which to snapshot the state.
  std::vector<double> trajectory_times = {0.0, 0.25, 0.5, 0.75, 1.0};
};

template <typename S>
struct SampleResult {
  nn::Tensor<S> x0;
  std::vector<nn::Tensor<S>> trajectory;  // one state per requested time
  int denoiser_evaluations = 0;
};

// Reverse process: x_T = y + kappa*sqrt(eta_T)*noise, then T posterior steps
// with x0 predicted by the denoiser at every step. Deterministic given seed.
template <typename S>
SampleResult<S> sample(const DenoiserFn<S>& f, const nn::Tensor<S>& y, const nn::Tensor<S>& cond,
                       const Schedule& schedule, std::uint64_t seed,
                       const SampleOptions& options = {}) {
  if (!y.same_shape(cond)) raise(ErrorCode::ShapeMismatch, "y and cond differ in shape");
  Rng rng(seed);
  SampleResult<S> result;

  const int T = schedule.T;
  std::vector<int> snapshot_steps;
  if (options.record_trajectory) {
    for (double frac : options.trajectory_times) {
      snapshot_steps.push_back(static_cast<int>(std::lround(frac * T)));
    }
  }
  auto maybe_snapshot = [&](int steps_done, const nn::Tensor<S>& state) {
    if (!options.record_trajectory) return;
    for (std::size_t i = result.trajectory.size(); i < snapshot_steps.size(); ++i) {
      if (snapshot_steps[i] == steps_done) {
        result.trajectory.push_back(state);
      } else {
        break;
      }
    }
  };

  const S sig_init = static_cast<S>(schedule.kappa * std::sqrt(schedule.eta_at(T)));
  nn::Tensor<S> x_t(y.shape);
  {
    const nn::Tensor<S> eps = randn_like(y, rng);
    for (std::size_t i = 0; i < x_t.data.size(); ++i) {
      x_t.data[i] = y.data[i] + sig_init * eps.data[i];
    }
  }
  maybe_snapshot(0, x_t);

  for (int t = T; t >= 1; --t) {
    const nn::Tensor<S> x0_hat = f(x_t, cond, t);
    ++result.denoiser_evaluations;
    nn::Tensor<S> noise(x_t.shape);
    if (t >= 2) noise = randn_like(x_t, rng);  // the t = 1 step is deterministic
    x_t = posterior_step(x_t, x0_hat, y, t, schedule, noise);
    maybe_snapshot(T - t + 1, x_t);
  }
  result.x0 = std::move(x_t);
  return result;
}

}  // namespace cinesr::diffusion
