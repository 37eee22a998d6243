#include "cinesr/diffusion.hpp"

namespace cinesr::diffusion {

Schedule build_schedule(int T, double kappa, double p, double eta_min, double eta_max) {
  if (T < 2) raise(ErrorCode::InvalidScheduleParams, "T must be >= 2");
  if (!(kappa > 0.0)) raise(ErrorCode::InvalidScheduleParams, "kappa must be > 0");
  if (!(p > 0.0)) raise(ErrorCode::InvalidScheduleParams, "p must be > 0");
  if (!(eta_min > 0.0) || !(eta_min < eta_max) || !(eta_max <= 1.0)) {
    raise(ErrorCode::InvalidScheduleParams, "need 0 < eta_min < eta_max <= 1");
  }

  Schedule s;
  s.T = T;
  s.kappa = kappa;
  s.p = p;
  s.eta.resize(static_cast<std::size_t>(T));
  const double sqrt_min = std::sqrt(eta_min);
  const double ratio = std::sqrt(eta_max) / sqrt_min;
  for (int t = 1; t <= T; ++t) {
    const double w = std::pow(static_cast<double>(t - 1) / (T - 1), p);
    const double root = sqrt_min * std::pow(ratio, w);
    s.eta[static_cast<std::size_t>(t - 1)] = root * root;
  }
  // Pin the endpoints exactly against accumulated rounding.
  s.eta.front() = eta_min;
  s.eta.back() = eta_max;
  for (std::size_t i = 1; i < s.eta.size(); ++i) {
    if (!(s.eta[i] > s.eta[i - 1])) {
      raise(ErrorCode::InvalidScheduleParams, "schedule is not strictly increasing");
    }
  }
  return s;
}

}  // namespace cinesr::diffusion
