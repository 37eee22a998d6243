#pragma once

#include <cmath>
#include <vector>

#include "cinesr/nn/layers.hpp"

namespace cinesr::nn {

// Adam with bias correction, no weight decay.
template <typename S>
class Adam {
 public:
  explicit Adam(std::vector<Param<S>*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<S>& p = *params_[i];
      for (std::size_t k = 0; k < p.value.data.size(); ++k) {
        const double g = static_cast<double>(p.grad.data[k]);
        m_[i].data[k] = static_cast<S>(beta1_ * m_[i].data[k] + (1.0 - beta1_) * g);
        v_[i].data[k] = static_cast<S>(beta2_ * v_[i].data[k] + (1.0 - beta2_) * g * g);
        const double mhat = m_[i].data[k] / bc1;
        const double vhat = v_[i].data[k] / bc2;
        p.value.data[k] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }

  std::vector<Tensor<S>>& moment1() { return m_; }
  std::vector<Tensor<S>>& moment2() { return v_; }
  const std::vector<Param<S>*>& params() const { return params_; }

 private:
  std::vector<Param<S>*> params_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<S>> m_;
  std::vector<Tensor<S>> v_;
};

}  // namespace cinesr::nn
