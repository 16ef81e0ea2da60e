#include <doctest.h>

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "demotion/harness/config.hpp"

using namespace demotion;
using nlohmann::json;
namespace fs = std::filesystem;

TEST_SUITE("config") {

TEST_CASE("serialization round trips losslessly") {
  ExperimentConfig cfg = default_config();
  cfg.motion_type = "respiratory";
  cfg.axis = PhaseAxis::rows;
  cfg.n_test = 7;
  cfg.seed = 12345;
  cfg.sampler.n_prime = 20;
  cfg.sampler.corrector_input = CorrectorInput::previous;
  cfg.schedule.n_steps = 500;
  cfg.ranges.resp_m = {0.3, 4.0};
  cfg.train.iterations = 123;
  cfg.model.base_width = 8;

  const std::string text = config_to_json_string(cfg);
  const ExperimentConfig back = config_from_json_string(text);
  CHECK(config_to_json_string(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));

  // axis and schedule propagate into the sub-configs on load
  CHECK(back.sampler.axis == PhaseAxis::rows);
  CHECK(back.ranges.axis == PhaseAxis::rows);
  CHECK(back.sampler.schedule.n_steps == 500);
  CHECK(back.train.schedule.n_steps == 500);
  CHECK(back.sampler.corrector_input == CorrectorInput::previous);
  CHECK(back.ranges.resp_m.lo == 0.3);
}

TEST_CASE("unknown keys are rejected at every level") {
  const std::string base = config_to_json_string(default_config());
  for (const char* where : {"", "sampler", "ranges", "model", "train", "schedule"}) {
    json j = json::parse(base);
    if (std::string(where).empty()) {
      j["surprise"] = 1;
    } else {
      j[where]["surprise"] = 1;
    }
    CAPTURE(where);
    CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);
  }
}

TEST_CASE("invalid values are rejected") {
  json j = json::parse(config_to_json_string(default_config()));
  j["version"] = 2;
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);

  j = json::parse(config_to_json_string(default_config()));
  j["axis"] = "diagonal";
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);

  j = json::parse(config_to_json_string(default_config()));
  j["motion_type"] = "brownian";
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);

  j = json::parse(config_to_json_string(default_config()));
  j["sampler"]["corrector_input"] = "future";
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);

  j = json::parse(config_to_json_string(default_config()));
  j["image_size"] = 15;
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);

  j = json::parse(config_to_json_string(default_config()));
  j["image_size"] = 66;  // not divisible by the model stride
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);

  j = json::parse(config_to_json_string(default_config()));
  j["ranges"]["alpha_deg"] = json::array({2.0, -2.0});  // lo > hi
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);

  j = json::parse(config_to_json_string(default_config()));
  j["train"]["lr_min_ratio"] = 1.5;
  CHECK_THROWS_AS(config_from_json_string(j.dump()), std::invalid_argument);
}

TEST_CASE("overrides parse typed values with string fallback") {
  const ExperimentConfig cfg = apply_overrides(
      default_config(),
      {"sampler.n_prime=20", "motion_type=respiratory", "seed=77",
       "train.lr=0.001", "save_panels=false", "ranges.alpha_deg=[-1.0,1.0]",
       "schedule.n_steps=400"});
  CHECK(cfg.sampler.n_prime == 20);
  CHECK(cfg.motion_type == "respiratory");
  CHECK(cfg.seed == 77);
  CHECK(cfg.train.lr == 0.001);
  CHECK(cfg.save_panels == false);
  CHECK(cfg.ranges.alpha_deg.lo == -1.0);
  CHECK(cfg.ranges.alpha_deg.hi == 1.0);
  CHECK(cfg.sampler.schedule.n_steps == 400);
  CHECK(cfg.train.schedule.n_steps == 400);

  CHECK_THROWS_AS(apply_overrides(default_config(), {"nonsense=1"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(default_config(), {"sampler.rho=2.0"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(default_config(), {"no_equals_sign"}),
                  std::invalid_argument);
}

TEST_CASE("hash ignores the output directory only") {
  ExperimentConfig a = default_config();
  a.output_dir = "here";
  ExperimentConfig b = a;
  b.output_dir = "there";
  CHECK(config_hash(a) == config_hash(b));

  b.sampler.n_prime = 11;
  CHECK(config_hash(a) != config_hash(b));

  ExperimentConfig c = a;
  c.seed = 1;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("files save and load with overrides") {
  const fs::path dir = fs::temp_directory_path() / "demotion_tests" / "config";
  fs::create_directories(dir);
  const std::string path = (dir / "config.json").string();

  ExperimentConfig cfg = default_config();
  cfg.n_test = 3;
  save_config(cfg, path);

  const ExperimentConfig back = load_config(path);
  CHECK(config_hash(back) == config_hash(cfg));

  const ExperimentConfig tweaked = load_config(path, {"n_test=5"});
  CHECK(tweaked.n_test == 5);

  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), std::runtime_error);
}

TEST_CASE("defaults validate and target the benchmark geometry") {
  const ExperimentConfig cfg = default_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.image_size == 64);
  CHECK(cfg.ranges.pixel_spacing_cm == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(cfg.schedule.n_steps == 1000);
  CHECK(cfg.sampler.n_prime == 10);
  CHECK(cfg.sampler.m_repeats == 3);
  CHECK(cfg.sampler.lambda_n_prime == 0.01);
}

}  // TEST_SUITE
