#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "demotion/nn.hpp"
#include "demotion/sde.hpp"
#include "demotion/types.hpp"

namespace demotion {

// Architecture of the score network. The network itself predicts the scaled
// noise f(x, sigma); the score is f / sigma (see ScoreModel::evaluate).
struct ScoreModelConfig {
  int in_channels = 2;  // real and imaginary planes
  int base_width = 12;
  int levels = 2;
  int emb_dim = 48;
  int norm_groups = 4;
  int n_fourier = 32;
  double fourier_scale = 16.0;
  std::uint64_t init_seed = 0x5C0DE;

  void validate() const;
  nn::UNetConfig unet() const;
  int stride_factor() const { return 1 << levels; }
};

struct TrainConfig {
  int iterations = 50000;
  int batch_size = 4;
  double lr = 2e-4;
  double lr_min_ratio = 1.0;  // cosine-decay floor as a fraction of lr; 1 = constant lr
  double ema_decay = 0.999;
  double grad_clip = 1.0;
  int checkpoint_every = 1000;
  int log_every = 50;
  std::uint64_t seed = 0;
  SigmaSchedule schedule;
  std::string loss_log_path;    // CSV (step, loss, smoothed loss); empty = off
  std::string checkpoint_path;  // periodic on-disk checkpoint; empty = off

  void validate() const;
};

struct Checkpoint {
  ScoreModelConfig model;
  SigmaSchedule schedule;
  std::int64_t step = 0;
  std::uint64_t config_hash = 0;
  bool diverged = false;
  std::vector<std::vector<float>> params;
  std::vector<std::vector<float>> ema;
  std::vector<float> fourier_freqs;
};

// A loaded score network bound to its noise schedule. Evaluation reuses
// internal activation buffers, so concurrent callers need separate
// instances (training is single-writer anyway).
class ScoreModel {
 public:
  ScoreModel(const ScoreModelConfig& cfg, const SigmaSchedule& schedule);

  // s(x, sigma) of identical shape; sigma is clamped to the schedule's
  // [sigma_min, sigma_max] with a warning on stderr.
  ComplexImage evaluate(const ComplexImage& x, double sigma);

  const ScoreModelConfig& config() const { return cfg_; }
  const SigmaSchedule& schedule() const { return schedule_; }
  nn::UNet& net() { return net_; }

 private:
  ScoreModelConfig cfg_;
  SigmaSchedule schedule_;
  nn::UNet net_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  // one entry per completed step
};

// Denoising score matching on motion-free images: per example, a schedule
// index is drawn uniformly from {1..N}, the image is perturbed to that
// noise level, and the network regresses the noise. Divergence (non-finite
// loss) stops training and the last periodic snapshot is returned with
// `diverged` set.
TrainResult train(const std::vector<ComplexImage>& dataset,
                  const ScoreModelConfig& mcfg, const TrainConfig& tcfg);

Checkpoint snapshot(ScoreModel& model, const nn::Ema& ema, std::int64_t step,
                    std::uint64_t config_hash);

// Builds a model from a checkpoint; use_ema selects the averaged weights.
std::unique_ptr<ScoreModel> load_model(const Checkpoint& ck, bool use_ema = true);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::uint64_t fnv1a64(const std::string& s);
std::uint64_t score_config_hash(const ScoreModelConfig& mcfg, const TrainConfig& tcfg);

}  // namespace demotion
