#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cinesr/rng.hpp"

namespace cinesr::nn {

// Dense row-major tensor. Shapes follow NCHW for feature maps.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), S(0));
  }

  static std::int64_t numel_of(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  Tensor reshaped(std::vector<int> s) const {
    assert(numel_of(s) == numel());
    Tensor t;
    t.shape = std::move(s);
    t.data = data;
    return t;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> t;
    t.shape = shape;
    t.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) t.data[i] = static_cast<T>(data[i]);
    return t;
  }

  static Tensor randn(std::vector<int> s, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(s));
    for (auto& v : t.data) v = static_cast<S>(stddev * rng.normal());
    return t;
  }
};

template <typename S>
Tensor<S> operator+(const Tensor<S>& a, const Tensor<S>& b) {
  assert(a.same_shape(b));
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

template <typename S>
Tensor<S> operator-(const Tensor<S>& a, const Tensor<S>& b) {
  assert(a.same_shape(b));
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

template <typename S>
Tensor<S> operator*(const Tensor<S>& a, S k) {
  Tensor<S> out = a;
  for (auto& v : out.data) v *= k;
  return out;
}

template <typename S>
void axpy(S alpha, const Tensor<S>& x, Tensor<S>& y) {
  assert(x.same_shape(y));
  for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

// Concatenates along the channel axis of NCHW tensors.
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  assert(a.ndim() == 4 && b.ndim() == 4);
  assert(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3));
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  Tensor<S> out({n, ca + cb, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.ptr() + i * ca * plane, ca * plane, out.ptr() + i * (ca + cb) * plane);
    std::copy_n(b.ptr() + i * cb * plane, cb * plane, out.ptr() + (i * (ca + cb) + ca) * plane);
  }
  return out;
}

template <typename S>
void split_channels(const Tensor<S>& x, int ca, Tensor<S>& a, Tensor<S>& b) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int cb = c - ca;
  a = Tensor<S>({n, ca, h, w});
  b = Tensor<S>({n, cb, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::copy_n(x.ptr() + i * c * plane, ca * plane, a.ptr() + i * ca * plane);
    std::copy_n(x.ptr() + (i * c + ca) * plane, cb * plane, b.ptr() + i * cb * plane);
  }
}

// Mean-squared-error loss; grad is with respect to pred.
template <typename S>
S mse_loss(const Tensor<S>& pred, const Tensor<S>& target, Tensor<S>* grad = nullptr) {
  assert(pred.same_shape(target));
  const S inv_n = S(1) / static_cast<S>(pred.numel());
  S loss = 0;
  if (grad) *grad = Tensor<S>(pred.shape);
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const S d = pred.data[i] - target.data[i];
    loss += d * d * inv_n;
    if (grad) grad->data[i] = S(2) * d * inv_n;
  }
  return loss;
}

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace cinesr::nn
