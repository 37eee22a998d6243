#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "cinesr/nn/layers.hpp"

namespace cinesr::nn {

// Sinusoidal embedding of an integer step index.
template <typename S>
Tensor<S> sinusoidal_embedding(int t, int dim) {
  Tensor<S> e({1, dim});
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / std::max(half - 1, 1));
    e.data[static_cast<std::size_t>(i)] = static_cast<S>(std::sin(t * freq));
    e.data[static_cast<std::size_t>(half + i)] = static_cast<S>(std::cos(t * freq));
  }
  return e;
}

// Pre-activation residual block with an additive per-channel time shift.
template <typename S>
class ResBlock {
 public:
  ResBlock(const std::string& name, int in_ch, int out_ch, int temb_dim, int groups, Rng& rng)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        gn1_(name + ".gn1", in_ch, pick_groups(in_ch, groups)),
        gn2_(name + ".gn2", out_ch, pick_groups(out_ch, groups)),
        conv1_(name + ".conv1", in_ch, out_ch, 3, 1, rng),
        conv2_(name + ".conv2", out_ch, out_ch, 3, 1, rng, 0.5),
        temb_proj_(name + ".temb", temb_dim, out_ch, rng, 0.5) {
    if (in_ch != out_ch) {
      skip_ = std::make_unique<Conv2d<S>>(name + ".skip", in_ch, out_ch, 1, 1, rng);
    }
  }

  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>& temb) {
    Tensor<S> h = conv1_.forward(act1_.forward(gn1_.forward(x)));
    const Tensor<S> tproj = temb_proj_.forward(tact_.forward(temb));
    const int n = h.dim(0), c = h.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(h.dim(2)) * h.dim(3);
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        const S b = tproj.data[static_cast<std::size_t>(i * c + cc)];
        S* p = h.ptr() + (static_cast<std::int64_t>(i) * c + cc) * hw;
        for (std::int64_t k = 0; k < hw; ++k) p[k] += b;
      }
    }
    h = conv2_.forward(act2_.forward(gn2_.forward(h)));
    const Tensor<S> res = skip_ ? skip_->forward(x) : x;
    return h + res;
  }

  // Returns dx; accumulates dtemb into dtemb_accum.
  Tensor<S> backward(const Tensor<S>& dy, Tensor<S>& dtemb_accum) {
    Tensor<S> dh = gn2_.backward(act2_.backward(conv2_.backward(dy)));

    // Time-shift gradient: sum over spatial positions.
    const int n = dh.dim(0), c = dh.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(dh.dim(2)) * dh.dim(3);
    Tensor<S> dtp({n, c});
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        const S* p = dh.ptr() + (static_cast<std::int64_t>(i) * c + cc) * hw;
        S s = 0;
        for (std::int64_t k = 0; k < hw; ++k) s += p[k];
        dtp.data[static_cast<std::size_t>(i * c + cc)] = s;
      }
    }
    const Tensor<S> dtemb = tact_.backward(temb_proj_.backward(dtp));
    for (std::size_t i = 0; i < dtemb.data.size(); ++i) dtemb_accum.data[i] += dtemb.data[i];

    Tensor<S> dx = gn1_.backward(act1_.backward(conv1_.backward(dh)));
    if (skip_) {
      const Tensor<S> dskip = skip_->backward(dy);
      for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dskip.data[i];
    } else {
      for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
    }
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) {
    gn1_.collect(out);
    gn2_.collect(out);
    conv1_.collect(out);
    conv2_.collect(out);
    temb_proj_.collect(out);
    if (skip_) skip_->collect(out);
  }

  static int pick_groups(int channels, int want) {
    int g = std::min(want, channels);
    while (channels % g != 0) --g;
    return g;
  }

 private:
  int in_ch_, out_ch_;
  GroupNorm<S> gn1_, gn2_;
  SiLU<S> act1_, act2_, tact_;
  Conv2d<S> conv1_, conv2_;
  Linear<S> temb_proj_;
  std::unique_ptr<Conv2d<S>> skip_;
};

struct UNetConfig {
  int in_channels = 18;   // diffusion state + conditioning, concatenated
  int out_channels = 9;
  int base_channels = 32;
  int channel_mult = 2;   // second-resolution width multiplier
  int temb_dim = 64;
  int groups = 8;
};

// Two-resolution U-Net with two residual blocks per resolution and a skip
// connection across the downsampling stage.
template <typename S>
class UNet {
 public:
  UNet(const UNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const int c0 = cfg.base_channels;
    const int c1 = cfg.base_channels * cfg.channel_mult;
    const int td = cfg.temb_dim;

    temb_fc1_ = std::make_unique<Linear<S>>("temb.fc1", td, td * 2, rng);
    temb_fc2_ = std::make_unique<Linear<S>>("temb.fc2", td * 2, td * 2, rng);
    stem_ = std::make_unique<Conv2d<S>>("stem", cfg.in_channels, c0, 3, 1, rng);
    enc0a_ = std::make_unique<ResBlock<S>>("enc0a", c0, c0, td * 2, cfg.groups, rng);
    enc0b_ = std::make_unique<ResBlock<S>>("enc0b", c0, c0, td * 2, cfg.groups, rng);
    down_ = std::make_unique<Conv2d<S>>("down", c0, c1, 3, 2, rng);
    enc1a_ = std::make_unique<ResBlock<S>>("enc1a", c1, c1, td * 2, cfg.groups, rng);
    enc1b_ = std::make_unique<ResBlock<S>>("enc1b", c1, c1, td * 2, cfg.groups, rng);
    up_conv_ = std::make_unique<Conv2d<S>>("up", c1, c0, 3, 1, rng);
    dec0a_ = std::make_unique<ResBlock<S>>("dec0a", 2 * c0, c0, td * 2, cfg.groups, rng);
    dec0b_ = std::make_unique<ResBlock<S>>("dec0b", c0, c0, td * 2, cfg.groups, rng);
    head_gn_ = std::make_unique<GroupNorm<S>>("head.gn", c0, ResBlock<S>::pick_groups(c0, cfg.groups));
    head_conv_ = std::make_unique<Conv2d<S>>("head.conv", c0, cfg.out_channels, 3, 1, rng);
    // Zero-initialized head so the initial prediction is unbiased.
    head_conv_->weight().value.fill(S(0));
  }

  // x_t and cond are NCHW; t is the 1-based schedule step.
  Tensor<S> forward(const Tensor<S>& x_t, const Tensor<S>& cond, int t) {
    const Tensor<S> x = concat_channels(x_t, cond);
    const int n = x.dim(0);

    Tensor<S> te = sinusoidal_embedding<S>(t, cfg_.temb_dim);
    Tensor<S> teb({n, cfg_.temb_dim});
    for (int i = 0; i < n; ++i) {
      std::copy_n(te.ptr(), cfg_.temb_dim, teb.ptr() + static_cast<std::int64_t>(i) * cfg_.temb_dim);
    }
    temb_ = temb_fc2_->forward(temb_act_.forward(temb_fc1_->forward(teb)));

    Tensor<S> h0 = stem_->forward(x);
    h0 = enc0a_->forward(h0, temb_);
    skip_out_ = enc0b_->forward(h0, temb_);
    Tensor<S> h1 = down_->forward(skip_out_);
    h1 = enc1a_->forward(h1, temb_);
    h1 = enc1b_->forward(h1, temb_);
    Tensor<S> u = up_conv_->forward(up_.forward(h1));
    Tensor<S> cat = concat_channels(u, skip_out_);
    Tensor<S> d = dec0a_->forward(cat, temb_);
    d = dec0b_->forward(d, temb_);
    return head_conv_->forward(head_act_.forward(head_gn_->forward(d)));
  }

  // Gradient of the last forward with respect to x_t (conditioning and time
  // branches are parameter-only consumers here).
  Tensor<S> backward(const Tensor<S>& dy) {
    Tensor<S> dtemb(temb_.shape);

    Tensor<S> dd = head_gn_->backward(head_act_.backward(head_conv_->backward(dy)));
    dd = dec0b_->backward(dd, dtemb);
    Tensor<S> dcat = dec0a_->backward(dd, dtemb);
    Tensor<S> du, dskip;
    split_channels(dcat, up_conv_out_channels(), du, dskip);
    Tensor<S> dh1 = up_.backward(up_conv_->backward(du));
    dh1 = enc1b_->backward(dh1, dtemb);
    dh1 = enc1a_->backward(dh1, dtemb);
    Tensor<S> dskip_total = down_->backward(dh1);
    for (std::size_t i = 0; i < dskip_total.data.size(); ++i) dskip_total.data[i] += dskip.data[i];
    Tensor<S> dh0 = enc0b_->backward(dskip_total, dtemb);
    dh0 = enc0a_->backward(dh0, dtemb);
    Tensor<S> dx = stem_->backward(dh0);

    temb_fc1_->backward(temb_act_.backward(temb_fc2_->backward(dtemb)));

    Tensor<S> dx_t, dcond;
    split_channels(dx, cfg_.in_channels - cond_channels(), dx_t, dcond);
    return dx_t;
  }

  std::vector<Param<S>*> parameters() {
    std::vector<Param<S>*> out;
    temb_fc1_->collect(out);
    temb_fc2_->collect(out);
    stem_->collect(out);
    enc0a_->collect(out);
    enc0b_->collect(out);
    down_->collect(out);
    enc1a_->collect(out);
    enc1b_->collect(out);
    up_conv_->collect(out);
    dec0a_->collect(out);
    dec0b_->collect(out);
    head_gn_->collect(out);
    head_conv_->collect(out);
    return out;
  }

  const UNetConfig& config() const { return cfg_; }

 private:
  int up_conv_out_channels() const { return cfg_.base_channels; }
  int cond_channels() const { return cfg_.in_channels - cfg_.out_channels; }

  UNetConfig cfg_;
  std::unique_ptr<Linear<S>> temb_fc1_, temb_fc2_;
  SiLU<S> temb_act_;
  std::unique_ptr<Conv2d<S>> stem_, down_, up_conv_, head_conv_;
  std::unique_ptr<ResBlock<S>> enc0a_, enc0b_, enc1a_, enc1b_, dec0a_, dec0b_;
  Upsample2x<S> up_;
  std::unique_ptr<GroupNorm<S>> head_gn_;
  SiLU<S> head_act_;
  Tensor<S> temb_, skip_out_;
};

}  // namespace cinesr::nn
