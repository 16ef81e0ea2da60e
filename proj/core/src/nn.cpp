#include "demotion/nn.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace demotion::nn {

namespace {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using MapCM = Eigen::Map<Eigen::MatrixXf>;
using ConstMapRM = Eigen::Map<const MatrixRM>;
using ConstMapCM = Eigen::Map<const Eigen::MatrixXf>;

void check(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

// col(r, m) = x(ni, ci, oy*stride - pad + ky, ox*stride - pad + kx) with
// r = (ci*k + ky)*k + kx and m = (ni*oh + oy)*ow + ox; zero outside.
void im2col(const Tensor& x, int k, int stride, int pad, int oh, int ow,
            Eigen::MatrixXf& col) {
  const int K = x.c * k * k;
  const long M = static_cast<long>(x.n) * oh * ow;
  col.resize(K, M);
  for (int ni = 0; ni < x.n; ++ni)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const long m = (static_cast<long>(ni) * oh + oy) * ow + ox;
        float* dst = col.data() + m * K;
        const int iy0 = oy * stride - pad;
        const int ix0 = ox * stride - pad;
        for (int ci = 0; ci < x.c; ++ci) {
          const float* src = x.plane(ni, ci);
          for (int ky = 0; ky < k; ++ky) {
            const int iy = iy0 + ky;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ix0 + kx;
              *dst++ = (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                           ? src[iy * x.w + ix]
                           : 0.0f;
            }
          }
        }
      }
}

void col2im(const Eigen::MatrixXf& dcol, int k, int stride, int pad, int oh, int ow,
            Tensor& gx) {
  gx.set_zero();
  for (int ni = 0; ni < gx.n; ++ni)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const long m = (static_cast<long>(ni) * oh + oy) * ow + ox;
        const float* src = dcol.data() + m * dcol.rows();
        const int iy0 = oy * stride - pad;
        const int ix0 = ox * stride - pad;
        for (int ci = 0; ci < gx.c; ++ci) {
          float* dst = gx.plane(ni, ci);
          for (int ky = 0; ky < k; ++ky) {
            const int iy = iy0 + ky;
            for (int kx = 0; kx < k; ++kx, ++src) {
              const int ix = ix0 + kx;
              if (iy >= 0 && iy < gx.h && ix >= 0 && ix < gx.w)
                dst[iy * gx.w + ix] += *src;
            }
          }
        }
      }
}

}  // namespace

Conv2d::Conv2d(int cin, int cout, int ksize, int stride, int pad, std::string name)
    : cin_(cin), cout_(cout), k_(ksize), stride_(stride), pad_(pad),
      name_(std::move(name)),
      w_(static_cast<std::size_t>(cout) * cin * ksize * ksize, 0.0f),
      gw_(w_.size(), 0.0f), b_(cout, 0.0f), gb_(cout, 0.0f) {
  check(cin > 0 && cout > 0 && ksize > 0 && stride > 0 && pad >= 0,
        "conv: bad dimensions");
}

void Conv2d::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin_) * k_ * k_);
  for (float& v : w_) v = static_cast<float>(rng.uniform(-bound, bound));
  for (float& v : b_) v = static_cast<float>(rng.uniform(-bound, bound));
}

void Conv2d::init_zero() {
  std::fill(w_.begin(), w_.end(), 0.0f);
  std::fill(b_.begin(), b_.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x) {
  check(x.c == cin_, name_ + ": channel mismatch");
  x_ = x;
  const int oh = out_extent(x.h);
  const int ow = out_extent(x.w);
  check(oh > 0 && ow > 0, name_ + ": input too small");
  im2col(x, k_, stride_, pad_, oh, ow, col_);

  const int K = cin_ * k_ * k_;
  const long M = col_.cols();
  Eigen::MatrixXf yt(M, cout_);
  yt.noalias() = col_.transpose() * ConstMapCM(w_.data(), K, cout_);

  Tensor y(x.n, cout_, oh, ow);
  const long ohw = static_cast<long>(oh) * ow;
  for (int ni = 0; ni < x.n; ++ni)
    for (int oc = 0; oc < cout_; ++oc) {
      const float* src = yt.col(oc).data() + static_cast<long>(ni) * ohw;
      float* dst = y.plane(ni, oc);
      const float bias = b_[oc];
      for (long p = 0; p < ohw; ++p) dst[p] = src[p] + bias;
    }
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const int oh = gy.h;
  const int ow = gy.w;
  const long ohw = static_cast<long>(oh) * ow;
  const int K = cin_ * k_ * k_;
  const long M = col_.cols();
  check(gy.c == cout_ && static_cast<long>(gy.n) * ohw == M,
        name_ + ": gradient shape mismatch");

  Eigen::MatrixXf dyt(M, cout_);
  for (int ni = 0; ni < gy.n; ++ni)
    for (int oc = 0; oc < cout_; ++oc)
      std::memcpy(dyt.col(oc).data() + static_cast<long>(ni) * ohw,
                  gy.plane(ni, oc), sizeof(float) * ohw);

  for (int oc = 0; oc < cout_; ++oc) gb_[oc] += dyt.col(oc).sum();
  MapCM(gw_.data(), K, cout_).noalias() += col_ * dyt;

  Eigen::MatrixXf dcol(K, M);
  dcol.noalias() = ConstMapCM(w_.data(), K, cout_) * dyt.transpose();

  Tensor gx(x_.n, cin_, x_.h, x_.w);
  col2im(dcol, k_, stride_, pad_, oh, ow, gx);
  return gx;
}

void Conv2d::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".w", w_.data(), gw_.data(), w_.size()});
  out.push_back({name_ + ".b", b_.data(), gb_.data(), b_.size()});
}

GroupNorm::GroupNorm(int channels, int groups, std::string name)
    : channels_(channels), groups_(groups), name_(std::move(name)),
      gamma_(channels, 1.0f), ggamma_(channels, 0.0f),
      beta_(channels, 0.0f), gbeta_(channels, 0.0f) {
  check(groups > 0 && channels % groups == 0,
        name_ + ": channels must divide into groups");
}

Tensor GroupNorm::forward(const Tensor& x) {
  check(x.c == channels_, name_ + ": channel mismatch");
  const int cpg = channels_ / groups_;
  const long hw = x.hw();
  const long pels = cpg * hw;

  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  istd_.assign(static_cast<std::size_t>(x.n) * groups_, 0.0f);
  Tensor y(x.n, x.c, x.h, x.w);

  for (int ni = 0; ni < x.n; ++ni)
    for (int g = 0; g < groups_; ++g) {
      double sum = 0.0;
      for (int c = 0; c < cpg; ++c) {
        const float* p = x.plane(ni, g * cpg + c);
        for (long i = 0; i < hw; ++i) sum += p[i];
      }
      const double mean = sum / static_cast<double>(pels);
      double var = 0.0;
      for (int c = 0; c < cpg; ++c) {
        const float* p = x.plane(ni, g * cpg + c);
        for (long i = 0; i < hw; ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(pels);
      const float istd = static_cast<float>(1.0 / std::sqrt(var + eps_));
      istd_[static_cast<std::size_t>(ni) * groups_ + g] = istd;
      for (int c = 0; c < cpg; ++c) {
        const int ch = g * cpg + c;
        const float* p = x.plane(ni, ch);
        float* xh = xhat_.plane(ni, ch);
        float* yo = y.plane(ni, ch);
        const float ga = gamma_[ch];
        const float be = beta_[ch];
        for (long i = 0; i < hw; ++i) {
          xh[i] = (p[i] - static_cast<float>(mean)) * istd;
          yo[i] = xh[i] * ga + be;
        }
      }
    }
  return y;
}

Tensor GroupNorm::backward(const Tensor& gy) {
  check(gy.same_shape(xhat_), name_ + ": gradient shape mismatch");
  const int cpg = channels_ / groups_;
  const long hw = gy.hw();
  const double pels = static_cast<double>(cpg) * hw;

  Tensor gx(gy.n, gy.c, gy.h, gy.w);
  for (int ni = 0; ni < gy.n; ++ni)
    for (int g = 0; g < groups_; ++g) {
      double s1 = 0.0, s2 = 0.0;
      for (int c = 0; c < cpg; ++c) {
        const int ch = g * cpg + c;
        const float* gp = gy.plane(ni, ch);
        const float* xh = xhat_.plane(ni, ch);
        const float ga = gamma_[ch];
        double dg = 0.0, db = 0.0;
        for (long i = 0; i < hw; ++i) {
          const double dxh = static_cast<double>(gp[i]) * ga;
          s1 += dxh;
          s2 += dxh * xh[i];
          dg += static_cast<double>(gp[i]) * xh[i];
          db += gp[i];
        }
        ggamma_[ch] += static_cast<float>(dg);
        gbeta_[ch] += static_cast<float>(db);
      }
      const double m1 = s1 / pels;
      const double m2 = s2 / pels;
      const float istd = istd_[static_cast<std::size_t>(ni) * groups_ + g];
      for (int c = 0; c < cpg; ++c) {
        const int ch = g * cpg + c;
        const float* gp = gy.plane(ni, ch);
        const float* xh = xhat_.plane(ni, ch);
        float* go = gx.plane(ni, ch);
        const float ga = gamma_[ch];
        for (long i = 0; i < hw; ++i) {
          const double dxh = static_cast<double>(gp[i]) * ga;
          go[i] = static_cast<float>(istd * (dxh - m1 - xh[i] * m2));
        }
      }
    }
  return gx;
}

void GroupNorm::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".gamma", gamma_.data(), ggamma_.data(), gamma_.size()});
  out.push_back({name_ + ".beta", beta_.data(), gbeta_.data(), beta_.size()});
}

Tensor SiLU::forward(const Tensor& x) {
  x_ = x;
  Tensor y(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float v = x.v[i];
    y.v[i] = v / (1.0f + std::exp(-v));
  }
  return y;
}

Tensor SiLU::backward(const Tensor& gy) {
  check(gy.same_shape(x_), "silu: gradient shape mismatch");
  Tensor gx(gy.n, gy.c, gy.h, gy.w);
  for (std::size_t i = 0; i < gy.size(); ++i) {
    const float v = x_.v[i];
    const float s = 1.0f / (1.0f + std::exp(-v));
    gx.v[i] = gy.v[i] * s * (1.0f + v * (1.0f - s));
  }
  return gx;
}

Linear::Linear(int in, int out, std::string name)
    : in_(in), out_(out), name_(std::move(name)),
      w_(static_cast<std::size_t>(out) * in, 0.0f), gw_(w_.size(), 0.0f),
      b_(out, 0.0f), gb_(out, 0.0f) {
  check(in > 0 && out > 0, "linear: bad dimensions");
}

void Linear::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  for (float& v : w_) v = static_cast<float>(rng.uniform(-bound, bound));
  for (float& v : b_) v = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor Linear::forward(const Tensor& x) {
  check(x.c == in_ && x.h == 1 && x.w == 1, name_ + ": expects (n, in) input");
  x_ = x;
  Tensor y(x.n, out_, 1, 1);
  MapRM(y.v.data(), x.n, out_).noalias() =
      ConstMapRM(x.v.data(), x.n, in_) * ConstMapRM(w_.data(), out_, in_).transpose();
  for (int ni = 0; ni < x.n; ++ni)
    for (int o = 0; o < out_; ++o) y.v[static_cast<std::size_t>(ni) * out_ + o] += b_[o];
  return y;
}

Tensor Linear::backward(const Tensor& gy) {
  check(gy.c == out_ && gy.n == x_.n, name_ + ": gradient shape mismatch");
  ConstMapRM gym(gy.v.data(), gy.n, out_);
  MapRM(gw_.data(), out_, in_).noalias() +=
      gym.transpose() * ConstMapRM(x_.v.data(), x_.n, in_);
  for (int o = 0; o < out_; ++o) gb_[o] += gym.col(o).sum();
  Tensor gx(x_.n, in_, 1, 1);
  MapRM(gx.v.data(), x_.n, in_).noalias() = gym * ConstMapRM(w_.data(), out_, in_);
  return gx;
}

void Linear::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".w", w_.data(), gw_.data(), w_.size()});
  out.push_back({name_ + ".b", b_.data(), gb_.data(), b_.size()});
}

Tensor Upsample2x::forward(const Tensor& x) {
  Tensor y(x.n, x.c, x.h * 2, x.w * 2);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      const float* src = x.plane(ni, ci);
      float* dst = y.plane(ni, ci);
      for (int yy = 0; yy < y.h; ++yy) {
        const float* row = src + (yy / 2) * x.w;
        for (int xx = 0; xx < y.w; ++xx) dst[yy * y.w + xx] = row[xx / 2];
      }
    }
  return y;
}

Tensor Upsample2x::backward(const Tensor& gy) {
  check(gy.h % 2 == 0 && gy.w % 2 == 0, "upsample: odd gradient extent");
  Tensor gx(gy.n, gy.c, gy.h / 2, gy.w / 2);
  for (int ni = 0; ni < gy.n; ++ni)
    for (int ci = 0; ci < gy.c; ++ci) {
      const float* src = gy.plane(ni, ci);
      float* dst = gx.plane(ni, ci);
      for (int yy = 0; yy < gy.h; ++yy)
        for (int xx = 0; xx < gy.w; ++xx)
          dst[(yy / 2) * gx.w + xx / 2] += src[yy * gy.w + xx];
    }
  return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check(a.n == b.n && a.h == b.h && a.w == b.w, "concat: spatial shape mismatch");
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  const std::size_t hw = static_cast<std::size_t>(a.h) * a.w;
  for (int ni = 0; ni < a.n; ++ni) {
    for (int ci = 0; ci < a.c; ++ci)
      std::memcpy(y.plane(ni, ci), a.plane(ni, ci), sizeof(float) * hw);
    for (int ci = 0; ci < b.c; ++ci)
      std::memcpy(y.plane(ni, a.c + ci), b.plane(ni, ci), sizeof(float) * hw);
  }
  return y;
}

void split_channels(const Tensor& g, int ca, Tensor& ga, Tensor& gb) {
  const int cb = g.c - ca;
  check(ca > 0 && cb > 0, "split: bad channel split");
  ga = Tensor(g.n, ca, g.h, g.w);
  gb = Tensor(g.n, cb, g.h, g.w);
  const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
  for (int ni = 0; ni < g.n; ++ni) {
    for (int ci = 0; ci < ca; ++ci)
      std::memcpy(ga.plane(ni, ci), g.plane(ni, ci), sizeof(float) * hw);
    for (int ci = 0; ci < cb; ++ci)
      std::memcpy(gb.plane(ni, ci), g.plane(ni, ca + ci), sizeof(float) * hw);
  }
}

ResBlock::ResBlock(int cin, int cout, int emb_dim, int groups, const std::string& name)
    : cin_(cin), cout_(cout),
      gn1_(cin, groups, name + ".gn1"), gn2_(cout, groups, name + ".gn2"),
      conv1_(cin, cout, 3, 1, 1, name + ".conv1"),
      conv2_(cout, cout, 3, 1, 1, name + ".conv2"),
      emb_proj_(emb_dim, cout, name + ".emb"),
      project_skip_(cin != cout),
      skip_(cin, cout, 1, 1, 0, name + ".skip") {}

void ResBlock::init(Rng& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
  emb_proj_.init(rng);
  if (project_skip_) skip_.init(rng);
}

Tensor ResBlock::forward(const Tensor& x, const Tensor& emb) {
  x_ = x;
  Tensor h = conv1_.forward(act1_.forward(gn1_.forward(x)));
  const Tensor bias = emb_proj_.forward(emb);
  for (int ni = 0; ni < h.n; ++ni)
    for (int ci = 0; ci < h.c; ++ci) {
      const float b = bias.v[static_cast<std::size_t>(ni) * cout_ + ci];
      float* p = h.plane(ni, ci);
      for (int i = 0; i < h.hw(); ++i) p[i] += b;
    }
  h = conv2_.forward(act2_.forward(gn2_.forward(h)));
  const Tensor s = project_skip_ ? skip_.forward(x) : x;
  for (std::size_t i = 0; i < h.size(); ++i) h.v[i] += s.v[i];
  return h;
}

Tensor ResBlock::backward(const Tensor& gy, Tensor& ge) {
  Tensor gh = gn2_.backward(act2_.backward(conv2_.backward(gy)));

  Tensor gbias(gh.n, cout_, 1, 1);
  for (int ni = 0; ni < gh.n; ++ni)
    for (int ci = 0; ci < cout_; ++ci) {
      const float* p = gh.plane(ni, ci);
      double acc = 0.0;
      for (int i = 0; i < gh.hw(); ++i) acc += p[i];
      gbias.v[static_cast<std::size_t>(ni) * cout_ + ci] = static_cast<float>(acc);
    }
  const Tensor ge_part = emb_proj_.backward(gbias);
  for (std::size_t i = 0; i < ge.size(); ++i) ge.v[i] += ge_part.v[i];

  Tensor gx = gn1_.backward(act1_.backward(conv1_.backward(gh)));
  const Tensor gskip = project_skip_ ? skip_.backward(gy) : gy;
  for (std::size_t i = 0; i < gx.size(); ++i) gx.v[i] += gskip.v[i];
  return gx;
}

void ResBlock::collect(std::vector<ParamRef>& out) {
  gn1_.collect(out);
  conv1_.collect(out);
  emb_proj_.collect(out);
  gn2_.collect(out);
  conv2_.collect(out);
  if (project_skip_) skip_.collect(out);
}

void UNetConfig::validate() const {
  check(in_channels > 0, "in_channels must be positive");
  check(base_width > 0 && base_width % norm_groups == 0,
        "base_width must be a positive multiple of norm_groups");
  check(levels >= 1 && levels <= 3, "levels must be in [1, 3]");
  check(emb_dim > 0 && n_fourier > 0, "embedding dimensions must be positive");
  check(fourier_scale > 0.0, "fourier_scale must be positive");
}

namespace {
int level_width(const UNetConfig& cfg, int level) {
  return cfg.base_width * (level == 0 ? 1 : 2);
}
}  // namespace

UNet::UNet(const UNetConfig& cfg)
    : cfg_(cfg),
      emb_lin1_(2 * cfg.n_fourier, cfg.emb_dim, "emb.lin1"),
      emb_lin2_(cfg.emb_dim, cfg.emb_dim, "emb.lin2"),
      conv_in_(cfg.in_channels, cfg.base_width, 3, 1, 1, "conv_in"),
      mid_(level_width(cfg, cfg.levels), level_width(cfg, cfg.levels), cfg.emb_dim,
           cfg.norm_groups, "mid"),
      head_norm_(cfg.base_width, cfg.norm_groups, "head.norm"),
      head_conv_(cfg.base_width, cfg.in_channels, 3, 1, 1, "head.conv") {
  cfg_.validate();
  const int L = cfg_.levels;
  for (int l = 0; l <= L; ++l) {
    const int cin = l == 0 ? cfg_.base_width : level_width(cfg_, l - 1);
    enc_.emplace_back(cin, level_width(cfg_, l), cfg_.emb_dim, cfg_.norm_groups,
                      "enc" + std::to_string(l));
    if (l < L)
      down_.emplace_back(level_width(cfg_, l), level_width(cfg_, l), 3, 2, 1,
                         "down" + std::to_string(l));
  }
  for (int l = L - 1; l >= 0; --l) {  // deepest first
    up_.emplace_back();
    up_conv_.emplace_back(level_width(cfg_, l + 1), level_width(cfg_, l), 3, 1, 1,
                          "up" + std::to_string(l));
    dec_.emplace_back(2 * level_width(cfg_, l), level_width(cfg_, l), cfg_.emb_dim,
                      cfg_.norm_groups, "dec" + std::to_string(l));
  }

  Rng rng(cfg_.init_seed);
  freqs_.resize(cfg_.n_fourier);
  for (float& f : freqs_) f = static_cast<float>(rng.normal() * cfg_.fourier_scale);

  conv_in_.init(rng);
  for (auto& b : enc_) b.init(rng);
  for (auto& c : down_) c.init(rng);
  mid_.init(rng);
  for (auto& c : up_conv_) c.init(rng);
  for (auto& b : dec_) b.init(rng);
  head_conv_.init_zero();
  emb_lin1_.init(rng);
  emb_lin2_.init(rng);

  conv_in_.collect(params_);
  for (auto& b : enc_) b.collect(params_);
  for (auto& c : down_) c.collect(params_);
  mid_.collect(params_);
  for (auto& c : up_conv_) c.collect(params_);
  for (auto& b : dec_) b.collect(params_);
  head_norm_.collect(params_);
  head_conv_.collect(params_);
  emb_lin1_.collect(params_);
  emb_lin2_.collect(params_);

  check(param_count() <= 10'000'000, "parameter budget exceeded");
}

std::size_t UNet::param_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.size;
  return total;
}

Tensor UNet::embed(const std::vector<float>& cond) {
  const int n = static_cast<int>(cond.size());
  const int nf = cfg_.n_fourier;
  cond_feat_ = Tensor(n, 2 * nf, 1, 1);
  constexpr float two_pi = 2.0f * std::numbers::pi_v<float>;
  for (int ni = 0; ni < n; ++ni)
    for (int j = 0; j < nf; ++j) {
      const float a = two_pi * freqs_[j] * cond[ni];
      cond_feat_.v[static_cast<std::size_t>(ni) * 2 * nf + j] = std::sin(a);
      cond_feat_.v[static_cast<std::size_t>(ni) * 2 * nf + nf + j] = std::cos(a);
    }
  return emb_lin2_.forward(emb_act_.forward(emb_lin1_.forward(cond_feat_)));
}

void UNet::backward_embed(const Tensor& ge) {
  emb_lin1_.backward(emb_act_.backward(emb_lin2_.backward(ge)));
}

Tensor UNet::forward(const Tensor& x, const std::vector<float>& cond) {
  check(x.c == cfg_.in_channels, "unet: channel mismatch");
  check(static_cast<int>(cond.size()) == x.n, "unet: one conditioner per sample");
  const int f = cfg_.stride_factor();
  check(x.h % f == 0 && x.w % f == 0 && x.h >= f && x.w >= f,
        "unet: spatial extent must be a multiple of " + std::to_string(f));

  emb_ = embed(cond);
  const int L = cfg_.levels;
  skips_.assign(L, Tensor());
  skip_channels_.assign(L, 0);

  Tensor h = conv_in_.forward(x);
  for (int l = 0; l < L; ++l) {
    h = enc_[l].forward(h, emb_);
    skips_[l] = h;
    skip_channels_[l] = h.c;
    h = down_[l].forward(h);
  }
  h = enc_[L].forward(h, emb_);
  h = mid_.forward(h, emb_);
  for (int d = 0; d < L; ++d) {
    const int l = L - 1 - d;
    h = up_[d].forward(h);
    h = up_conv_[d].forward(h);
    h = concat_channels(h, skips_[l]);
    h = dec_[d].forward(h, emb_);
  }
  return head_conv_.forward(head_act_.forward(head_norm_.forward(h)));
}

void UNet::backward(const Tensor& gy) {
  const int L = cfg_.levels;
  gemb_ = Tensor(emb_.n, emb_.c, 1, 1);

  Tensor g = head_norm_.backward(head_act_.backward(head_conv_.backward(gy)));
  std::vector<Tensor> gskips(L);
  for (int d = L - 1; d >= 0; --d) {
    const int l = L - 1 - d;
    g = dec_[d].backward(g, gemb_);
    Tensor ga, gb;
    split_channels(g, g.c - skip_channels_[l], ga, gb);
    gskips[l] = std::move(gb);
    g = up_[d].backward(up_conv_[d].backward(ga));
  }
  g = mid_.backward(g, gemb_);
  g = enc_[L].backward(g, gemb_);
  for (int l = L - 1; l >= 0; --l) {
    g = down_[l].backward(g);
    for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += gskips[l].v[i];
    g = enc_[l].backward(g, gemb_);
  }
  conv_in_.backward(g);
  backward_embed(gemb_);
}

void UNet::zero_grad() {
  for (auto& p : params_) std::fill(p.grad, p.grad + p.size, 0.0f);
}

Adam::Adam(std::vector<ParamRef>& params, float lr, float beta1, float beta2, float eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size, 0.0f);
    v_.emplace_back(p.size, 0.0f);
  }
}

double Adam::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const auto& p : params_)
    for (std::size_t i = 0; i < p.size; ++i)
      sq += static_cast<double>(p.grad[i]) * p.grad[i];
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / (norm + 1e-12));
    for (const auto& p : params_)
      for (std::size_t i = 0; i < p.size; ++i) p.grad[i] *= scale;
  }
  return norm;
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), t_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), t_);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    float* m = m_[k].data();
    float* v = v_[k].data();
    for (std::size_t i = 0; i < p.size; ++i) {
      const float g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0f - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0f - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

Ema::Ema(const std::vector<ParamRef>& params, float decay) : decay_(decay) {
  check(decay >= 0.0f && decay < 1.0f, "ema decay must lie in [0, 1)");
  for (const auto& p : params)
    shadow_.emplace_back(p.value, p.value + p.size);
}

void Ema::update(const std::vector<ParamRef>& params) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    const float* w = params[k].value;
    float* s = shadow_[k].data();
    for (std::size_t i = 0; i < params[k].size; ++i)
      s[i] = decay_ * s[i] + (1.0f - decay_) * w[i];
  }
}

void Ema::copy_to(std::vector<ParamRef>& params) const {
  for (std::size_t k = 0; k < params.size(); ++k)
    std::copy(shadow_[k].begin(), shadow_[k].end(), params[k].value);
}

}  // namespace demotion::nn
