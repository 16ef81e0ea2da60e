#include "demotion/harness/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>

namespace demotion {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& ctx) {
  require(j.is_object(), ctx + ": expected a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument(ctx + ": unknown key '" + item.key() + "'");
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

Interval interval_from(const json& j, const std::string& ctx) {
  require(j.is_array() && j.size() == 2, ctx + ": expected [lo, hi]");
  return Interval{j[0].get<double>(), j[1].get<double>()};
}

void get_interval(const json& j, const char* key, Interval& out) {
  if (j.contains(key)) out = interval_from(j.at(key), key);
}

json interval_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

PhaseAxis axis_from(const std::string& s) {
  if (s == "rows") return PhaseAxis::rows;
  if (s == "cols") return PhaseAxis::cols;
  throw std::invalid_argument("axis must be 'rows' or 'cols', got '" + s + "'");
}

std::string axis_name(PhaseAxis a) { return a == PhaseAxis::rows ? "rows" : "cols"; }

CorrectorInput corrector_from(const std::string& s) {
  if (s == "current") return CorrectorInput::current;
  if (s == "previous") return CorrectorInput::previous;
  throw std::invalid_argument("corrector_input must be 'current' or 'previous'");
}

std::string corrector_name(CorrectorInput c) {
  return c == CorrectorInput::current ? "current" : "previous";
}

ExperimentConfig from_json(const json& j) {
  check_keys(j, {"version", "dataset_path", "output_dir", "image_size", "n_train",
                 "n_test", "motion_type", "axis", "seed", "checkpoint",
                 "train_if_missing", "save_panels", "save_arrays", "schedule",
                 "model", "train", "sampler", "ranges"},
             "config");
  ExperimentConfig c;
  get_to(j, "version", c.version);
  require(c.version == 1, "unsupported config version " + std::to_string(c.version));
  get_to(j, "dataset_path", c.dataset_path);
  get_to(j, "output_dir", c.output_dir);
  get_to(j, "image_size", c.image_size);
  get_to(j, "n_train", c.n_train);
  get_to(j, "n_test", c.n_test);
  get_to(j, "motion_type", c.motion_type);
  if (j.contains("axis")) c.axis = axis_from(j.at("axis").get<std::string>());
  get_to(j, "seed", c.seed);
  get_to(j, "checkpoint", c.checkpoint);
  get_to(j, "train_if_missing", c.train_if_missing);
  get_to(j, "save_panels", c.save_panels);
  get_to(j, "save_arrays", c.save_arrays);

  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    check_keys(s, {"n_steps", "sigma_min", "sigma_max"}, "schedule");
    get_to(s, "n_steps", c.schedule.n_steps);
    get_to(s, "sigma_min", c.schedule.sigma_min);
    get_to(s, "sigma_max", c.schedule.sigma_max);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"in_channels", "base_width", "levels", "emb_dim", "norm_groups",
                   "n_fourier", "fourier_scale", "init_seed"},
               "model");
    get_to(m, "in_channels", c.model.in_channels);
    get_to(m, "base_width", c.model.base_width);
    get_to(m, "levels", c.model.levels);
    get_to(m, "emb_dim", c.model.emb_dim);
    get_to(m, "norm_groups", c.model.norm_groups);
    get_to(m, "n_fourier", c.model.n_fourier);
    get_to(m, "fourier_scale", c.model.fourier_scale);
    get_to(m, "init_seed", c.model.init_seed);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"iterations", "batch_size", "lr", "lr_min_ratio", "ema_decay",
                   "grad_clip", "checkpoint_every", "log_every", "seed"},
               "train");
    get_to(t, "iterations", c.train.iterations);
    get_to(t, "batch_size", c.train.batch_size);
    get_to(t, "lr", c.train.lr);
    get_to(t, "lr_min_ratio", c.train.lr_min_ratio);
    get_to(t, "ema_decay", c.train.ema_decay);
    get_to(t, "grad_clip", c.train.grad_clip);
    get_to(t, "checkpoint_every", c.train.checkpoint_every);
    get_to(t, "log_every", c.train.log_every);
    get_to(t, "seed", c.train.seed);
  }
  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    check_keys(s, {"n_prime", "m_repeats", "lambda_n_prime", "rho", "r_snr",
                   "corrector_input", "normalize", "keep_snapshots"},
               "sampler");
    get_to(s, "n_prime", c.sampler.n_prime);
    get_to(s, "m_repeats", c.sampler.m_repeats);
    get_to(s, "lambda_n_prime", c.sampler.lambda_n_prime);
    get_to(s, "rho", c.sampler.rho);
    get_to(s, "r_snr", c.sampler.r_snr);
    if (s.contains("corrector_input"))
      c.sampler.corrector_input = corrector_from(s.at("corrector_input").get<std::string>());
    get_to(s, "normalize", c.sampler.normalize);
    get_to(s, "keep_snapshots", c.sampler.keep_snapshots);
  }
  if (j.contains("ranges")) {
    const json& r = j.at("ranges");
    check_keys(r, {"alpha_deg", "delta_y_cm", "delta_x_cm", "rigid_k0", "resp_k0",
                   "resp_delta_cm", "resp_m", "resp_n", "pixel_spacing_cm"},
               "ranges");
    get_interval(r, "alpha_deg", c.ranges.alpha_deg);
    get_interval(r, "delta_y_cm", c.ranges.delta_y_cm);
    get_interval(r, "delta_x_cm", c.ranges.delta_x_cm);
    get_to(r, "rigid_k0", c.ranges.rigid_k0);
    get_interval(r, "resp_k0", c.ranges.resp_k0);
    get_interval(r, "resp_delta_cm", c.ranges.resp_delta_cm);
    get_interval(r, "resp_m", c.ranges.resp_m);
    get_interval(r, "resp_n", c.ranges.resp_n);
    get_to(r, "pixel_spacing_cm", c.ranges.pixel_spacing_cm);
  }

  // One authoritative schedule and phase axis for every stage.
  c.train.schedule = c.schedule;
  c.sampler.schedule = c.schedule;
  c.sampler.axis = c.axis;
  c.ranges.axis = c.axis;
  c.validate();
  return c;
}

void apply_override_list(json& j, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    require(eq != std::string::npos && eq > 0, "override must look like key.path=value");
    std::string key = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    for (char& ch : key)
      if (ch == '.') ch = '/';
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;  // plain string
    j[json::json_pointer("/" + key)] = parsed;
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = c.version;
  j["dataset_path"] = c.dataset_path;
  j["output_dir"] = c.output_dir;
  j["image_size"] = c.image_size;
  j["n_train"] = c.n_train;
  j["n_test"] = c.n_test;
  j["motion_type"] = c.motion_type;
  j["axis"] = axis_name(c.axis);
  j["seed"] = c.seed;
  j["checkpoint"] = c.checkpoint;
  j["train_if_missing"] = c.train_if_missing;
  j["save_panels"] = c.save_panels;
  j["save_arrays"] = c.save_arrays;
  j["schedule"] = {{"n_steps", c.schedule.n_steps},
                   {"sigma_min", c.schedule.sigma_min},
                   {"sigma_max", c.schedule.sigma_max}};
  j["model"] = {{"in_channels", c.model.in_channels},
                {"base_width", c.model.base_width},
                {"levels", c.model.levels},
                {"emb_dim", c.model.emb_dim},
                {"norm_groups", c.model.norm_groups},
                {"n_fourier", c.model.n_fourier},
                {"fourier_scale", c.model.fourier_scale},
                {"init_seed", c.model.init_seed}};
  j["train"] = {{"iterations", c.train.iterations},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"lr_min_ratio", c.train.lr_min_ratio},
                {"ema_decay", c.train.ema_decay},
                {"grad_clip", c.train.grad_clip},
                {"checkpoint_every", c.train.checkpoint_every},
                {"log_every", c.train.log_every},
                {"seed", c.train.seed}};
  j["sampler"] = {{"n_prime", c.sampler.n_prime},
                  {"m_repeats", c.sampler.m_repeats},
                  {"lambda_n_prime", c.sampler.lambda_n_prime},
                  {"rho", c.sampler.rho},
                  {"r_snr", c.sampler.r_snr},
                  {"corrector_input", corrector_name(c.sampler.corrector_input)},
                  {"normalize", c.sampler.normalize},
                  {"keep_snapshots", c.sampler.keep_snapshots}};
  j["ranges"] = {{"alpha_deg", interval_json(c.ranges.alpha_deg)},
                 {"delta_y_cm", interval_json(c.ranges.delta_y_cm)},
                 {"delta_x_cm", interval_json(c.ranges.delta_x_cm)},
                 {"rigid_k0", c.ranges.rigid_k0},
                 {"resp_k0", interval_json(c.ranges.resp_k0)},
                 {"resp_delta_cm", interval_json(c.ranges.resp_delta_cm)},
                 {"resp_m", interval_json(c.ranges.resp_m)},
                 {"resp_n", interval_json(c.ranges.resp_n)},
                 {"pixel_spacing_cm", c.ranges.pixel_spacing_cm}};
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(version == 1, "unsupported config version");
  require(image_size >= 16, "image_size must be at least 16");
  require(image_size % model.stride_factor() == 0,
          "image_size must be a multiple of the model stride");
  require(n_test >= 0, "n_test must be >= 0");
  require(dataset_path.empty() ? n_train >= 1 : true,
          "n_train must be >= 1 for synthetic datasets");
  require(motion_type == "rigid" || motion_type == "respiratory",
          "motion_type must be 'rigid' or 'respiratory'");
  schedule.validate();
  model.validate();
  train.validate();
  sampler.validate();
  ranges.validate();
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.ranges.pixel_spacing_cm = 0.35;  // 64 px span the usual 320 px field of view
  c.train.schedule = c.schedule;
  c.sampler.schedule = c.schedule;
  c.sampler.axis = c.axis;
  c.ranges.axis = c.axis;
  return c;
}

ExperimentConfig config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

std::string config_to_json_string(const ExperimentConfig& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is.good()) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  apply_override_list(j, overrides);
  return from_json(j);
}

ExperimentConfig apply_overrides(const ExperimentConfig& base,
                                 const std::vector<std::string>& overrides) {
  json j = to_json(base);
  apply_override_list(j, overrides);
  return from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), "cannot open " + path);
  os << config_to_json_string(cfg);
  require(os.good(), "failed writing " + path);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return fnv1a64(j.dump());
}

}  // namespace demotion
