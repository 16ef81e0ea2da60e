#include "demotion/score.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace demotion {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Cosine decay from lr down to lr * lr_min_ratio over the whole run.
double lr_at(const TrainConfig& tcfg, int step) {
  if (tcfg.lr_min_ratio >= 1.0 || tcfg.iterations <= 1) return tcfg.lr;
  const double u = static_cast<double>(step - 1) / (tcfg.iterations - 1);
  const double lo = tcfg.lr * tcfg.lr_min_ratio;
  return lo + (tcfg.lr - lo) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

// Real/imaginary planes of (x0 + sigma z) / sqrt(1 + sigma^2), the scaling
// that keeps the network input magnitude of order one across noise levels.
void write_scaled_planes(nn::Tensor& t, int sample, const ComplexImage& x, double scale) {
  const int rows = static_cast<int>(x.rows());
  const int cols = static_cast<int>(x.cols());
  float* re = t.plane(sample, 0);
  float* im = t.plane(sample, 1);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const Complex v = x(i, j);
      re[i * cols + j] = static_cast<float>(v.real() * scale);
      im[i * cols + j] = static_cast<float>(v.imag() * scale);
    }
}

}  // namespace

void ScoreModelConfig::validate() const {
  unet().validate();
}

nn::UNetConfig ScoreModelConfig::unet() const {
  nn::UNetConfig u;
  u.in_channels = in_channels;
  u.base_width = base_width;
  u.levels = levels;
  u.emb_dim = emb_dim;
  u.norm_groups = norm_groups;
  u.n_fourier = n_fourier;
  u.fourier_scale = fourier_scale;
  u.init_seed = init_seed;
  return u;
}

void TrainConfig::validate() const {
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(std::isfinite(lr) && lr > 0.0, "lr must be positive");
  require(std::isfinite(lr_min_ratio) && lr_min_ratio >= 0.0 && lr_min_ratio <= 1.0,
          "lr_min_ratio must lie in [0, 1]");
  require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must lie in [0, 1)");
  require(std::isfinite(grad_clip) && grad_clip >= 0.0, "grad_clip must be >= 0");
  require(checkpoint_every >= 1 && log_every >= 1, "cadences must be >= 1");
  schedule.validate();
}

ScoreModel::ScoreModel(const ScoreModelConfig& cfg, const SigmaSchedule& schedule)
    : cfg_(cfg), schedule_(schedule), net_(cfg.unet()) {
  schedule_.validate();
}

ComplexImage ScoreModel::evaluate(const ComplexImage& x, double sigma) {
  require(all_finite(x), "score input must be finite");
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
  const double lo = schedule_.sigma_min;
  const double hi = schedule_.sigma_max;
  if (sigma < lo || sigma > hi) {
    static int warnings = 0;
    if (warnings < 5) {
      std::cerr << "warning: sigma " << sigma << " clamped to [" << lo << ", " << hi
                << "]\n";
      ++warnings;
    }
    sigma = std::min(std::max(sigma, lo), hi);
  }

  const int rows = static_cast<int>(x.rows());
  const int cols = static_cast<int>(x.cols());
  nn::Tensor in(1, 2, rows, cols);
  write_scaled_planes(in, 0, x, 1.0 / std::sqrt(1.0 + sigma * sigma));
  const nn::Tensor f = net_.forward(in, {static_cast<float>(std::log(sigma))});

  ComplexImage score(rows, cols);
  const float* re = f.plane(0, 0);
  const float* im = f.plane(0, 1);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      score(i, j) = Complex(re[i * cols + j], im[i * cols + j]) / sigma;
  if (!all_finite(score)) throw std::runtime_error("score network produced non-finite output");
  return score;
}

Checkpoint snapshot(ScoreModel& model, const nn::Ema& ema, std::int64_t step,
                    std::uint64_t config_hash) {
  Checkpoint ck;
  ck.model = model.config();
  ck.schedule = model.schedule();
  ck.step = step;
  ck.config_hash = config_hash;
  for (const auto& p : model.net().params())
    ck.params.emplace_back(p.value, p.value + p.size);
  ck.ema = ema.shadow();
  ck.fourier_freqs = model.net().fourier_freqs();
  return ck;
}

std::unique_ptr<ScoreModel> load_model(const Checkpoint& ck, bool use_ema) {
  auto model = std::make_unique<ScoreModel>(ck.model, ck.schedule);
  auto& params = model->net().params();
  const auto& src = use_ema ? ck.ema : ck.params;
  require(src.size() == params.size(), "checkpoint does not match the architecture");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(src[k].size() == params[k].size, "checkpoint tensor size mismatch");
    std::copy(src[k].begin(), src[k].end(), params[k].value);
  }
  require(ck.fourier_freqs.size() == model->net().fourier_freqs().size(),
          "checkpoint frequency count mismatch");
  model->net().fourier_freqs() = ck.fourier_freqs;
  return model;
}

TrainResult train(const std::vector<ComplexImage>& dataset,
                  const ScoreModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  require(!dataset.empty(), "training dataset is empty");
  const Eigen::Index rows = dataset.front().rows();
  const Eigen::Index cols = dataset.front().cols();
  const int f = mcfg.stride_factor();
  require(rows % f == 0 && cols % f == 0, "image extent must be a multiple of the stride");
  for (const auto& img : dataset) {
    require(img.rows() == rows && img.cols() == cols, "dataset images must share one shape");
    require(all_finite(img), "dataset contains non-finite values");
  }

  auto model = std::make_unique<ScoreModel>(mcfg, tcfg.schedule);
  auto& params = model->net().params();
  nn::Adam opt(params, static_cast<float>(tcfg.lr));
  nn::Ema ema(params, static_cast<float>(tcfg.ema_decay));
  Rng rng(tcfg.seed);
  const std::uint64_t hash = score_config_hash(mcfg, tcfg);

  std::ofstream log;
  if (!tcfg.loss_log_path.empty()) {
    log.open(tcfg.loss_log_path);
    require(log.good(), "cannot open loss log " + tcfg.loss_log_path);
    log << "step,loss,smoothed\n";
  }

  TrainResult result;
  result.losses.reserve(tcfg.iterations);
  Checkpoint last_good = snapshot(*model, ema, 0, hash);

  const int B = tcfg.batch_size;
  const int hw = static_cast<int>(rows * cols);
  const double inv = 1.0 / (static_cast<double>(B) * hw);
  nn::Tensor input(B, 2, static_cast<int>(rows), static_cast<int>(cols));
  nn::Tensor target(B, 2, static_cast<int>(rows), static_cast<int>(cols));
  std::vector<float> cond(B);
  double smoothed = -1.0;

  for (int step = 1; step <= tcfg.iterations; ++step) {
    for (int b = 0; b < B; ++b) {
      const auto idx = static_cast<std::size_t>(rng.uniform() * dataset.size());
      const ComplexImage& x0 = dataset[idx < dataset.size() ? idx : dataset.size() - 1];
      int i_sigma = 1 + static_cast<int>(rng.uniform() * tcfg.schedule.n_steps);
      if (i_sigma > tcfg.schedule.n_steps) i_sigma = tcfg.schedule.n_steps;
      const double sigma = sigma_at(tcfg.schedule, i_sigma);
      const ComplexImage z = rng.complex_normal_field(rows, cols);
      write_scaled_planes(input, b, x0 + sigma * z, 1.0 / std::sqrt(1.0 + sigma * sigma));
      write_scaled_planes(target, b, z, 1.0);
      cond[b] = static_cast<float>(std::log(sigma));
    }

    const nn::Tensor out = model->net().forward(input, cond);
    nn::Tensor gy(out.n, out.c, out.h, out.w);
    double loss = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = static_cast<double>(out.v[i]) + target.v[i];
      loss += d * d;
      gy.v[i] = static_cast<float>(2.0 * d * inv);
    }
    loss *= inv;

    if (!std::isfinite(loss)) {
      std::cerr << "training diverged at step " << step << "; keeping step "
                << last_good.step << " checkpoint\n";
      result.checkpoint = last_good;
      result.checkpoint.diverged = true;
      return result;
    }

    model->net().zero_grad();
    model->net().backward(gy);
    if (tcfg.grad_clip > 0.0) opt.clip_grad_norm(tcfg.grad_clip);
    opt.set_lr(static_cast<float>(lr_at(tcfg, step)));
    opt.step();
    ema.update(params);

    result.losses.push_back(loss);
    smoothed = smoothed < 0.0 ? loss : 0.99 * smoothed + 0.01 * loss;
    if (log.is_open() && (step % tcfg.log_every == 0 || step == tcfg.iterations))
      log << step << ',' << loss << ',' << smoothed << '\n';
    if (step % tcfg.checkpoint_every == 0) {
      last_good = snapshot(*model, ema, step, hash);
      if (!tcfg.checkpoint_path.empty()) save_checkpoint(last_good, tcfg.checkpoint_path);
    }
  }

  result.checkpoint = snapshot(*model, ema, tcfg.iterations, hash);
  return result;
}

namespace {

constexpr char kMagic[8] = {'D', 'M', 'S', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_floats(std::ostream& os, const std::vector<float>& v) {
  write_pod(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::istream& is) {
  std::uint64_t n = 0;
  read_pod(is, n);
  std::vector<float> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!(os.good())) throw std::runtime_error("cannot open checkpoint file " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, ck.model.in_channels);
  write_pod(os, ck.model.base_width);
  write_pod(os, ck.model.levels);
  write_pod(os, ck.model.emb_dim);
  write_pod(os, ck.model.norm_groups);
  write_pod(os, ck.model.n_fourier);
  write_pod(os, ck.model.fourier_scale);
  write_pod(os, ck.model.init_seed);
  write_pod(os, ck.schedule.n_steps);
  write_pod(os, ck.schedule.sigma_min);
  write_pod(os, ck.schedule.sigma_max);
  write_pod(os, ck.step);
  write_pod(os, ck.config_hash);
  write_pod(os, static_cast<std::uint8_t>(ck.diverged));
  write_pod(os, static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& t : ck.params) write_floats(os, t);
  write_pod(os, static_cast<std::uint32_t>(ck.ema.size()));
  for (const auto& t : ck.ema) write_floats(os, t);
  write_floats(os, ck.fourier_freqs);
  require(os.good(), "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!(is.good())) throw std::runtime_error("cannot open checkpoint file " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  require(is.good() && std::equal(magic, magic + 8, kMagic), "not a checkpoint file: " + path);

  Checkpoint ck;
  read_pod(is, ck.model.in_channels);
  read_pod(is, ck.model.base_width);
  read_pod(is, ck.model.levels);
  read_pod(is, ck.model.emb_dim);
  read_pod(is, ck.model.norm_groups);
  read_pod(is, ck.model.n_fourier);
  read_pod(is, ck.model.fourier_scale);
  read_pod(is, ck.model.init_seed);
  read_pod(is, ck.schedule.n_steps);
  read_pod(is, ck.schedule.sigma_min);
  read_pod(is, ck.schedule.sigma_max);
  read_pod(is, ck.step);
  read_pod(is, ck.config_hash);
  std::uint8_t diverged = 0;
  read_pod(is, diverged);
  ck.diverged = diverged != 0;
  std::uint32_t n = 0;
  read_pod(is, n);
  for (std::uint32_t i = 0; i < n; ++i) ck.params.push_back(read_floats(is));
  read_pod(is, n);
  for (std::uint32_t i = 0; i < n; ++i) ck.ema.push_back(read_floats(is));
  ck.fourier_freqs = read_floats(is);
  require(is.good(), "truncated checkpoint file " + path);
  return ck;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::uint64_t score_config_hash(const ScoreModelConfig& mcfg, const TrainConfig& tcfg) {
  std::ostringstream os;
  os << "in=" << mcfg.in_channels << ";w=" << mcfg.base_width << ";l=" << mcfg.levels
     << ";e=" << mcfg.emb_dim << ";g=" << mcfg.norm_groups << ";nf=" << mcfg.n_fourier
     << ";fs=" << fmt_double(mcfg.fourier_scale) << ";is=" << mcfg.init_seed
     << ";it=" << tcfg.iterations << ";bs=" << tcfg.batch_size
     << ";lr=" << fmt_double(tcfg.lr) << ";lrmr=" << fmt_double(tcfg.lr_min_ratio)
     << ";ema=" << fmt_double(tcfg.ema_decay)
     << ";clip=" << fmt_double(tcfg.grad_clip) << ";seed=" << tcfg.seed
     << ";N=" << tcfg.schedule.n_steps << ";smin=" << fmt_double(tcfg.schedule.sigma_min)
     << ";smax=" << fmt_double(tcfg.schedule.sigma_max);
  return fnv1a64(os.str());
}

}  // namespace demotion
