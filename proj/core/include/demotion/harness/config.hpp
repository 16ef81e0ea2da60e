#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "demotion/motion.hpp"
#include "demotion/sampler.hpp"
#include "demotion/score.hpp"
#include "demotion/sde.hpp"

namespace demotion {

// One declarative description of an experiment. The on-disk format is JSON
// with a version field; unknown keys are rejected. schedule/axis are the
// single source of truth and are copied into the train and sampler configs
// on load. Derived fields (per-image seeds, log paths) never serialize.
struct ExperimentConfig {
  int version = 1;
  std::string dataset_path;  // empty: synthesize ellipse phantoms
  std::string output_dir = "run";
  int image_size = 64;
  int n_train = 500;
  int n_test = 24;
  std::string motion_type = "rigid";  // or "respiratory"
  PhaseAxis axis = PhaseAxis::cols;
  std::uint64_t seed = 0;
  std::string checkpoint;  // reuse this checkpoint instead of training
  bool train_if_missing = true;
  bool save_panels = true;
  bool save_arrays = true;

  SigmaSchedule schedule;
  ScoreModelConfig model;
  TrainConfig train;
  SamplerConfig sampler;
  SimulationRanges ranges;

  void validate() const;
};

ExperimentConfig default_config();

// Parses and validates; throws std::invalid_argument on unknown keys, type
// errors, or invalid values.
ExperimentConfig config_from_json_string(const std::string& text);
std::string config_to_json_string(const ExperimentConfig& cfg);

// Loads a config file, then applies "dotted.path=value" overrides (values
// parsed as JSON, falling back to strings).
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

// The same override mechanism on an in-memory config.
ExperimentConfig apply_overrides(const ExperimentConfig& base,
                                 const std::vector<std::string>& overrides);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// FNV-1a over the canonical serialization with output_dir removed, so runs
// of one experiment hash alike regardless of where they are written.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace demotion
