#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "demotion/harness/config.hpp"

namespace demotion {

// One metrics row per (image, method).
struct ReportRow {
  std::string image_id;
  std::string method;
  std::uint64_t config_hash = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double wall_seconds = 0.0;
};

struct MethodStats {
  std::string method;
  int count = 0;
  double mean_psnr_db = 0.0;
  double std_psnr_db = 0.0;
  double mean_ssim = 0.0;
  double std_ssim = 0.0;
  double mean_wall_seconds = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> failures;  // "image_id: reason"; never abort a sweep
  std::string output_dir;             // resolved
  std::uint64_t config_hash = 0;

  // Sample statistics over the rows of one method (std over n - 1, zero for
  // fewer than two rows).
  MethodStats stats(const std::string& method) const;
  std::vector<std::string> methods() const;  // first-appearance order
};

// Relative output directories are placed under $DEMOTION_OUT_ROOT when that
// variable is set and non-empty; absolute paths are used as given.
std::string resolve_output_dir(const std::string& dir);

// Trains a score model on the training split and writes checkpoint.bin,
// train_loss.csv, config.json and run_meta.json into the output directory.
// Returns the checkpoint path.
std::string run_train(const ExperimentConfig& cfg);

// Corrupts the test split and writes clean/<id>.npy (real image),
// corrupted/<id>.npy (corrupted k-space) and sim_params.json (per-image
// motion parameters and derived seeds). No model required.
ExperimentReport run_simulate(const ExperimentConfig& cfg);

// Reconstructs every image listed in the output directory's sim_params.json
// from corrupted/<id>.npy into recon/<id>.npy. Requires a checkpoint
// (cfg.checkpoint, or checkpoint.bin left in the directory by a train run);
// this stage never trains. Stage results equal run_experiment's bit for bit
// because each image's sampler seed is stored in sim_params.json.
ExperimentReport run_reconstruct(const ExperimentConfig& cfg);

// The full pipeline: obtain a model (checkpoint, else train), then per test
// image simulate corruption, reconstruct, and score both against the clean
// original. Writes metrics.csv, summary.md, sim_params.json, run_meta.json,
// per-image arrays (save_arrays) and comparison panels (save_panels).
// Per-image failures are recorded and the run continues.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Re-reads config.json and metrics.csv from an existing run directory,
// verifies every row carries the config's hash (mismatch is an error), and
// regenerates summary.md.
ExperimentReport run_report(const std::string& run_dir);

// One sampler setting of the ablation sweep.
struct AblationCell {
  double lambda_n_prime = 0.01;
  int n_prime = 10;
  int m_repeats = 3;

  std::string label() const;  // "np10_m3_lam0.01"
};

// Sweeps lambda_N' in {0, 0.01, 0.1}, N' in {1, 10, 100} and M in {1, 3, 5}
// around the defaults, plus the 30 x 1 step-budget counterpart of 10 x 3,
// deduplicated.
std::vector<AblationCell> default_ablation_grid();

// Trains (or loads) one model at the root output directory, then runs each
// cell into cells/<label>/ with the shared checkpoint, identical per-image
// corruption and sampler seeds, and panels disabled. Writes
// ablation_summary.csv (one row per cell with mean wall seconds per image).
// The returned rows hold each cell's reconstructed metrics under the cell
// label as method; config hashes differ across cells by construction.
ExperimentReport ablate(const ExperimentConfig& cfg,
                        const std::vector<AblationCell>& grid);

// CSV schema v1: image_id,method,config_hash,psnr_db,ssim,wall_seconds with
// a mandatory header, UTF-8, LF line endings. Hashes are 16 hex digits.
void write_metrics_csv(const std::vector<ReportRow>& rows, const std::string& path);
std::vector<ReportRow> read_metrics_csv(const std::string& path);

// Mean +/- std per method; timings and timestamps stay out of the summary
// (they live in metrics.csv and run_meta.json).
void write_summary(const ExperimentReport& report, const std::string& path);

}  // namespace demotion
