#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "demotion/rng.hpp"

namespace demotion::nn {

// Dense float32 tensor in NCHW order (width fastest). Vectors ride along as
// (n, c, 1, 1).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  std::size_t size() const { return v.size(); }
  int hw() const { return h * w; }
  float* plane(int ni, int ci) {
    return v.data() + (static_cast<std::size_t>(ni) * c + ci) * static_cast<std::size_t>(h) * w;
  }
  const float* plane(int ni, int ci) const {
    return v.data() + (static_cast<std::size_t>(ni) * c + ci) * static_cast<std::size_t>(h) * w;
  }
  float& at(int ni, int ci, int y, int x) {
    return v[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
  }
  float at(int ni, int ci, int y, int x) const {
    return v[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
  }
  void set_zero() { std::fill(v.begin(), v.end(), 0.0f); }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

// View of one trainable array and its gradient; pointers stay valid for the
// lifetime of the owning layer.
struct ParamRef {
  std::string name;
  float* value = nullptr;
  float* grad = nullptr;
  std::size_t size = 0;
};

class Conv2d {
 public:
  Conv2d(int cin, int cout, int ksize, int stride, int pad, std::string name);

  void init(Rng& rng);       // uniform(-b, b) with b = 1/sqrt(fan_in)
  void init_zero();          // zero weights and bias

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);  // accumulates weight grads, returns gx

  void collect(std::vector<ParamRef>& out);
  int out_extent(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

 private:
  int cin_, cout_, k_, stride_, pad_;
  std::string name_;
  std::vector<float> w_, gw_, b_, gb_;  // w layout [cout][cin][k][k]
  Tensor x_;
  Eigen::MatrixXf col_;  // im2col of the last input, (cin k^2) x (n oh ow)
};

class GroupNorm {
 public:
  GroupNorm(int channels, int groups, std::string name);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  void collect(std::vector<ParamRef>& out);

 private:
  int channels_, groups_;
  float eps_ = 1e-5f;
  std::string name_;
  std::vector<float> gamma_, ggamma_, beta_, gbeta_;
  Tensor xhat_;
  std::vector<float> istd_;  // per (sample, group)
};

class SiLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);

 private:
  Tensor x_;
};

class Linear {
 public:
  Linear(int in, int out, std::string name);

  void init(Rng& rng);
  Tensor forward(const Tensor& x);            // x: (n, in, 1, 1)
  Tensor backward(const Tensor& gy);
  void collect(std::vector<ParamRef>& out);

 private:
  int in_, out_;
  std::string name_;
  std::vector<float> w_, gw_, b_, gb_;  // w layout [out][in]
  Tensor x_;
};

// Doubles height and width by pixel replication.
class Upsample2x {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
// Splits a gradient of concat_channels(a, b) back into the two parts.
void split_channels(const Tensor& g, int ca, Tensor& ga, Tensor& gb);

// GroupNorm -> SiLU -> conv -> (+ per-channel embedding bias) -> GroupNorm
// -> SiLU -> conv, plus a shortcut (1x1 conv when widths differ).
class ResBlock {
 public:
  ResBlock(int cin, int cout, int emb_dim, int groups, const std::string& name);

  Tensor forward(const Tensor& x, const Tensor& emb);
  // ge accumulates the gradient with respect to the shared embedding.
  Tensor backward(const Tensor& gy, Tensor& ge);
  void collect(std::vector<ParamRef>& out);
  void init(Rng& rng);

 private:
  int cin_, cout_;
  GroupNorm gn1_, gn2_;
  SiLU act1_, act2_;
  Conv2d conv1_, conv2_;
  Linear emb_proj_;
  bool project_skip_;
  Conv2d skip_;
  Tensor x_;
};

struct UNetConfig {
  int in_channels = 2;
  int base_width = 12;
  int levels = 2;        // downsampling stages; level > 0 runs at 2x width
  int emb_dim = 48;
  int norm_groups = 4;
  int n_fourier = 32;    // frequency count; the feature vector is twice this
  double fourier_scale = 16.0;
  std::uint64_t init_seed = 0x5C0DE;

  void validate() const;
  int stride_factor() const { return 1 << levels; }
};

// Encoder/decoder with skip connections, conditioned on a scalar per sample
// (log sigma) through random Fourier features and a small MLP that feeds a
// bias into every ResBlock. The head convolution starts at zero so the
// network initially outputs zero.
class UNet {
 public:
  explicit UNet(const UNetConfig& cfg);
  UNet(const UNet&) = delete;
  UNet& operator=(const UNet&) = delete;

  Tensor forward(const Tensor& x, const std::vector<float>& cond);
  void backward(const Tensor& gy);
  void zero_grad();

  const UNetConfig& config() const { return cfg_; }
  std::vector<ParamRef>& params() { return params_; }
  std::size_t param_count() const;
  // Fixed (untrained) Fourier frequencies; part of the checkpoint.
  std::vector<float>& fourier_freqs() { return freqs_; }

 private:
  Tensor embed(const std::vector<float>& cond);
  void backward_embed(const Tensor& ge);

  UNetConfig cfg_;
  std::vector<float> freqs_;
  Linear emb_lin1_, emb_lin2_;
  SiLU emb_act_;

  Conv2d conv_in_;
  std::vector<ResBlock> enc_;      // one per level, full resolution first
  std::vector<Conv2d> down_;       // stride-2 between levels
  ResBlock mid_;
  std::vector<Conv2d> up_conv_;    // after nearest upsampling, deepest first
  std::vector<Upsample2x> up_;
  std::vector<ResBlock> dec_;      // deepest first
  GroupNorm head_norm_;
  SiLU head_act_;
  Conv2d head_conv_;

  std::vector<ParamRef> params_;

  // forward cache
  Tensor cond_feat_;               // Fourier features of the conditioner
  std::vector<Tensor> skips_;
  std::vector<int> skip_channels_;
  Tensor emb_;
  Tensor gemb_;
};

class Adam {
 public:
  Adam(std::vector<ParamRef>& params, float lr, float beta1 = 0.9f,
       float beta2 = 0.999f, float eps = 1e-8f);

  // Global-norm clip over all gradients; returns the pre-clip norm.
  double clip_grad_norm(double max_norm);
  void set_lr(float lr) { lr_ = lr; }
  void step();

 private:
  std::vector<ParamRef>& params_;
  float lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Exponential moving average of the parameter vectors.
class Ema {
 public:
  Ema(const std::vector<ParamRef>& params, float decay);

  void update(const std::vector<ParamRef>& params);
  const std::vector<std::vector<float>>& shadow() const { return shadow_; }
  std::vector<std::vector<float>>& shadow() { return shadow_; }
  // Overwrites the live parameters with the averaged ones.
  void copy_to(std::vector<ParamRef>& params) const;

 private:
  float decay_;
  std::vector<std::vector<float>> shadow_;
};

}  // namespace demotion::nn
