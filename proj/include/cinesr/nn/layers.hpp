#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cinesr/nn/tensor.hpp"

namespace cinesr::nn {

template <typename S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  void init(std::string n, Tensor<S> v) {
    name = std::move(n);
    grad = Tensor<S>(v.shape);
    value = std::move(v);
  }
  void zero_grad() { grad.fill(S(0)); }
};

template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<S> forward(const Tensor<S>& x) = 0;
  // Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<S> backward(const Tensor<S>& dy) = 0;
  virtual void collect(std::vector<Param<S>*>& out) {}
};

template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<MatrixRM<S>>;
template <typename S>
using ConstMapRM = Eigen::Map<const MatrixRM<S>>;

template <typename S>
class Conv2d : public Layer<S> {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, Rng& rng,
         double init_gain = 1.0)
      : in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize), stride_(stride), pad_(ksize / 2) {
    const double fan_in = static_cast<double>(in_ch) * ksize * ksize;
    const double stddev = init_gain * std::sqrt(2.0 / fan_in);
    weight_.init(name + ".weight", Tensor<S>::randn({out_ch, in_ch, ksize, ksize}, rng, stddev));
    bias_.init(name + ".bias", Tensor<S>({out_ch}));
  }

  Tensor<S> forward(const Tensor<S>& x) override {
    input_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    Tensor<S> y({n, out_ch_, oh, ow});
    const int ckk = in_ch_ * ksize_ * ksize_;
    col_.assign(static_cast<std::size_t>(ckk) * oh * ow, S(0));

    ConstMapRM<S> wm(weight_.value.ptr(), out_ch_, ckk);
    for (int i = 0; i < n; ++i) {
      im2col(x.ptr() + static_cast<std::int64_t>(i) * in_ch_ * h * w, h, w, col_.data());
      ConstMapRM<S> cm(col_.data(), ckk, oh * ow);
      MapRM<S> ym(y.ptr() + static_cast<std::int64_t>(i) * out_ch_ * oh * ow, out_ch_, oh * ow);
      ym.noalias() = wm * cm;
      for (int c = 0; c < out_ch_; ++c) ym.row(c).array() += weight_bias(c);
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    const Tensor<S>& x = input_;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    const int ckk = in_ch_ * ksize_ * ksize_;
    Tensor<S> dx(x.shape);

    MapRM<S> dwm(weight_.grad.ptr(), out_ch_, ckk);
    ConstMapRM<S> wm(weight_.value.ptr(), out_ch_, ckk);
    std::vector<S> dcol(static_cast<std::size_t>(ckk) * oh * ow);
    for (int i = 0; i < n; ++i) {
      im2col(x.ptr() + static_cast<std::int64_t>(i) * in_ch_ * h * w, h, w, col_.data());
      ConstMapRM<S> cm(col_.data(), ckk, oh * ow);
      ConstMapRM<S> dym(dy.ptr() + static_cast<std::int64_t>(i) * out_ch_ * oh * ow, out_ch_, oh * ow);
      dwm.noalias() += dym * cm.transpose();
      for (int c = 0; c < out_ch_; ++c) bias_.grad.data[static_cast<std::size_t>(c)] += dym.row(c).sum();
      MapRM<S> dcm(dcol.data(), ckk, oh * ow);
      dcm.noalias() = wm.transpose() * dym;
      col2im(dcol.data(), h, w, dx.ptr() + static_cast<std::int64_t>(i) * in_ch_ * h * w);
    }
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }

 private:
  S weight_bias(int c) const { return bias_.value.data[static_cast<std::size_t>(c)]; }
  int out_size(int in) const { return (in + 2 * pad_ - ksize_) / stride_ + 1; }

  void im2col(const S* src, int h, int w, S* col) const {
    const int oh = out_size(h), ow = out_size(w);
    std::int64_t r = 0;
    for (int c = 0; c < in_ch_; ++c) {
      const S* plane = src + static_cast<std::int64_t>(c) * h * w;
      for (int ky = 0; ky < ksize_; ++ky) {
        for (int kx = 0; kx < ksize_; ++kx, ++r) {
          S* dst = col + r * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= h) {
              std::fill_n(dst + static_cast<std::int64_t>(oy) * ow, ow, S(0));
              continue;
            }
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              dst[static_cast<std::int64_t>(oy) * ow + ox] =
                  (ix < 0 || ix >= w) ? S(0) : plane[static_cast<std::int64_t>(iy) * w + ix];
            }
          }
        }
      }
    }
  }

  void col2im(const S* col, int h, int w, S* dst) const {
    const int oh = out_size(h), ow = out_size(w);
    std::int64_t r = 0;
    for (int c = 0; c < in_ch_; ++c) {
      S* plane = dst + static_cast<std::int64_t>(c) * h * w;
      for (int ky = 0; ky < ksize_; ++ky) {
        for (int kx = 0; kx < ksize_; ++kx, ++r) {
          const S* src = col + r * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix < 0 || ix >= w) continue;
              plane[static_cast<std::int64_t>(iy) * w + ix] += src[static_cast<std::int64_t>(oy) * ow + ox];
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, ksize_, stride_, pad_;
  Param<S> weight_;
  Param<S> bias_;
  Tensor<S> input_;
  std::vector<S> col_;
};

template <typename S>
class Linear : public Layer<S> {
 public:
  Linear(std::string name, int in_dim, int out_dim, Rng& rng, double init_gain = 1.0)
      : in_dim_(in_dim), out_dim_(out_dim) {
    const double stddev = init_gain * std::sqrt(2.0 / in_dim);
    weight_.init(name + ".weight", Tensor<S>::randn({out_dim, in_dim}, rng, stddev));
    bias_.init(name + ".bias", Tensor<S>({out_dim}));
  }

  Tensor<S> forward(const Tensor<S>& x) override {
    input_ = x;
    const int n = x.dim(0);
    Tensor<S> y({n, out_dim_});
    ConstMapRM<S> xm(x.ptr(), n, in_dim_);
    ConstMapRM<S> wm(weight_.value.ptr(), out_dim_, in_dim_);
    MapRM<S> ym(y.ptr(), n, out_dim_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < out_dim_; ++j) ym(i, j) += bias_.value.data[static_cast<std::size_t>(j)];
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    const int n = input_.dim(0);
    Tensor<S> dx(input_.shape);
    ConstMapRM<S> xm(input_.ptr(), n, in_dim_);
    ConstMapRM<S> dym(dy.ptr(), n, out_dim_);
    ConstMapRM<S> wm(weight_.value.ptr(), out_dim_, in_dim_);
    MapRM<S> dwm(weight_.grad.ptr(), out_dim_, in_dim_);
    MapRM<S> dxm(dx.ptr(), n, in_dim_);
    dwm.noalias() += dym.transpose() * xm;
    dxm.noalias() = dym * wm;
    for (int j = 0; j < out_dim_; ++j) bias_.grad.data[static_cast<std::size_t>(j)] += dym.col(j).sum();
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  int in_dim_, out_dim_;
  Param<S> weight_;
  Param<S> bias_;
  Tensor<S> input_;
};

template <typename S>
class SiLU : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x) override {
    input_ = x;
    Tensor<S> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const S s = sigmoid(x.data[i]);
      y.data[i] = x.data[i] * s;
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    Tensor<S> dx(input_.shape);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      const S s = sigmoid(input_.data[i]);
      dx.data[i] = dy.data[i] * s * (S(1) + input_.data[i] * (S(1) - s));
    }
    return dx;
  }

  static S sigmoid(S x) { return S(1) / (S(1) + std::exp(-x)); }

 private:
  Tensor<S> input_;
};

// GroupNorm over channel groups of an NCHW tensor.
template <typename S>
class GroupNorm : public Layer<S> {
 public:
  GroupNorm(std::string name, int channels, int groups, double eps = 1e-5)
      : channels_(channels), groups_(groups), eps_(static_cast<S>(eps)) {
    Tensor<S> g({channels});
    g.fill(S(1));
    gamma_.init(name + ".gamma", std::move(g));
    beta_.init(name + ".beta", Tensor<S>({channels}));
  }

  Tensor<S> forward(const Tensor<S>& x) override {
    input_ = x;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int cg = c / groups_;
    const std::int64_t m = static_cast<std::int64_t>(cg) * h * w;
    mean_.assign(static_cast<std::size_t>(n) * groups_, S(0));
    inv_std_.assign(static_cast<std::size_t>(n) * groups_, S(0));
    Tensor<S> y(x.shape);
    for (int i = 0; i < n; ++i) {
      for (int g = 0; g < groups_; ++g) {
        const S* src = x.ptr() + (static_cast<std::int64_t>(i) * c + g * cg) * h * w;
        S mu = 0;
        for (std::int64_t k = 0; k < m; ++k) mu += src[k];
        mu /= static_cast<S>(m);
        S var = 0;
        for (std::int64_t k = 0; k < m; ++k) {
          const S d = src[k] - mu;
          var += d * d;
        }
        var /= static_cast<S>(m);
        const S inv = S(1) / std::sqrt(var + eps_);
        mean_[static_cast<std::size_t>(i) * groups_ + g] = mu;
        inv_std_[static_cast<std::size_t>(i) * groups_ + g] = inv;
        S* dst = y.ptr() + (static_cast<std::int64_t>(i) * c + g * cg) * h * w;
        for (int cc = 0; cc < cg; ++cc) {
          const S gm = gamma_.value.data[static_cast<std::size_t>(g * cg + cc)];
          const S bt = beta_.value.data[static_cast<std::size_t>(g * cg + cc)];
          const std::int64_t off = static_cast<std::int64_t>(cc) * h * w;
          for (std::int64_t k = 0; k < static_cast<std::int64_t>(h) * w; ++k) {
            dst[off + k] = gm * (src[off + k] - mu) * inv + bt;
          }
        }
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    const Tensor<S>& x = input_;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int cg = c / groups_;
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    const std::int64_t m = static_cast<std::int64_t>(cg) * hw;
    Tensor<S> dx(x.shape);
    for (int i = 0; i < n; ++i) {
      for (int g = 0; g < groups_; ++g) {
        const S mu = mean_[static_cast<std::size_t>(i) * groups_ + g];
        const S inv = inv_std_[static_cast<std::size_t>(i) * groups_ + g];
        const S* src = x.ptr() + (static_cast<std::int64_t>(i) * c + g * cg) * hw;
        const S* dyp = dy.ptr() + (static_cast<std::int64_t>(i) * c + g * cg) * hw;
        S* dxp = dx.ptr() + (static_cast<std::int64_t>(i) * c + g * cg) * hw;

        // Accumulate the two reductions of dxhat over the group.
        S sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int cc = 0; cc < cg; ++cc) {
          const S gm = gamma_.value.data[static_cast<std::size_t>(g * cg + cc)];
          for (std::int64_t k = 0; k < hw; ++k) {
            const std::int64_t idx = static_cast<std::int64_t>(cc) * hw + k;
            const S xhat = (src[idx] - mu) * inv;
            const S dxhat = dyp[idx] * gm;
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            gamma_.grad.data[static_cast<std::size_t>(g * cg + cc)] += dyp[idx] * xhat;
            beta_.grad.data[static_cast<std::size_t>(g * cg + cc)] += dyp[idx];
          }
        }
        const S inv_m = S(1) / static_cast<S>(m);
        for (int cc = 0; cc < cg; ++cc) {
          const S gm = gamma_.value.data[static_cast<std::size_t>(g * cg + cc)];
          for (std::int64_t k = 0; k < hw; ++k) {
            const std::int64_t idx = static_cast<std::int64_t>(cc) * hw + k;
            const S xhat = (src[idx] - mu) * inv;
            const S dxhat = dyp[idx] * gm;
            dxp[idx] = inv * (dxhat - inv_m * sum_dxhat - xhat * inv_m * sum_dxhat_xhat);
          }
        }
      }
    }
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  int channels_, groups_;
  S eps_;
  Param<S> gamma_;
  Param<S> beta_;
  Tensor<S> input_;
  std::vector<S> mean_, inv_std_;
};

// Nearest-neighbor 2x upsampling.
template <typename S>
class Upsample2x : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x) override {
    in_shape_ = x.shape;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<S> y({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n * c; ++i) {
      const S* src = x.ptr() + static_cast<std::int64_t>(i) * h * w;
      S* dst = y.ptr() + static_cast<std::int64_t>(i) * 4 * h * w;
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          const S v = src[static_cast<std::int64_t>(yy) * w + xx];
          S* d = dst + (static_cast<std::int64_t>(2 * yy) * 2 * w + 2 * xx);
          d[0] = v;
          d[1] = v;
          d[2 * w] = v;
          d[2 * w + 1] = v;
        }
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    Tensor<S> dx(in_shape_);
    for (int i = 0; i < n * c; ++i) {
      const S* src = dy.ptr() + static_cast<std::int64_t>(i) * 4 * h * w;
      S* dst = dx.ptr() + static_cast<std::int64_t>(i) * h * w;
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          const S* s = src + (static_cast<std::int64_t>(2 * yy) * 2 * w + 2 * xx);
          dst[static_cast<std::int64_t>(yy) * w + xx] = s[0] + s[1] + s[2 * w] + s[2 * w + 1];
        }
      }
    }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

template <typename S>
class Sequential : public Layer<S> {
 public:
  void add(std::unique_ptr<Layer<S>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<S> forward(const Tensor<S>& x) override {
    Tensor<S> h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    Tensor<S> g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  void collect(std::vector<Param<S>*>& out) override {
    for (auto& l : layers_) l->collect(out);
  }

 private:
  std::vector<std::unique_ptr<Layer<S>>> layers_;
};

}  // namespace cinesr::nn
