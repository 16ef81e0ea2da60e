#include "demotion/harness/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <utility>

#include "demotion/harness/dataset.hpp"
#include "demotion/kspace.hpp"
#include "demotion/metrics.hpp"
#include "demotion/motion.hpp"
#include "demotion/rng.hpp"
#include "demotion/sampler.hpp"
#include "demotion/score.hpp"

namespace demotion {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// I/O, file-format, and on-disk-state failures are environment errors,
// not caller bugs.
void io_check(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

// Independent seed streams per image so corruption stays identical across
// sampler settings (paired comparisons) and reconstruction noise never
// reuses simulation draws.
constexpr std::uint64_t kSimulateStream = 1;
constexpr std::uint64_t kReconstructStream = 2;

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream, long index) {
  return Rng::mix(Rng::mix(base, stream), static_cast<std::uint64_t>(index));
}

std::string fmt_fixed(double v, int prec) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string fmt_compact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string iso_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Copies the shared schedule and phase axis into the per-stage configs so
// programmatic callers get the same behavior as configs loaded from disk.
ExperimentConfig normalized(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.train.schedule = c.schedule;
  c.sampler.schedule = c.schedule;
  c.sampler.axis = c.axis;
  c.ranges.axis = c.axis;
  c.validate();
  return c;
}

bool same_model(const ScoreModelConfig& a, const ScoreModelConfig& b) {
  return a.in_channels == b.in_channels && a.base_width == b.base_width &&
         a.levels == b.levels && a.emb_dim == b.emb_dim &&
         a.norm_groups == b.norm_groups && a.n_fourier == b.n_fourier &&
         a.fourier_scale == b.fourier_scale && a.init_seed == b.init_seed;
}

bool same_schedule(const SigmaSchedule& a, const SigmaSchedule& b) {
  return a.n_steps == b.n_steps && a.sigma_min == b.sigma_min &&
         a.sigma_max == b.sigma_max;
}

std::string axis_name(PhaseAxis a) {
  return a == PhaseAxis::rows ? "rows" : "cols";
}

struct Split {
  std::vector<RealImage> train_images;
  std::vector<RealImage> test_images;
  std::vector<std::string> test_ids;
  std::vector<long> test_indices;  // position in the full ordered set
};

Split load_split(const ExperimentConfig& cfg) {
  Split s;
  if (cfg.dataset_path.empty()) {
    const int total = cfg.n_train + cfg.n_test;
    std::vector<RealImage> all = make_phantom_dataset(total, cfg.image_size, cfg.seed);
    s.train_images.assign(std::make_move_iterator(all.begin()),
                          std::make_move_iterator(all.begin() + cfg.n_train));
    for (int j = cfg.n_train; j < total; ++j) {
      s.test_images.push_back(std::move(all[static_cast<std::size_t>(j)]));
      char buf[32];
      std::snprintf(buf, sizeof buf, "phantom_%04d", j);
      s.test_ids.emplace_back(buf);
      s.test_indices.push_back(j);
    }
  } else {
    Dataset d = ingest_dataset(cfg.dataset_path, cfg.image_size);
    const long total = static_cast<long>(d.images.size());
    io_check(total >= cfg.n_test, "dataset holds fewer images than n_test");
    const long first_test = total - cfg.n_test;
    for (long j = 0; j < total; ++j) {
      auto& im = d.images[static_cast<std::size_t>(j)];
      if (j < first_test) {
        s.train_images.push_back(std::move(im));
      } else {
        s.test_images.push_back(std::move(im));
        s.test_ids.push_back(d.ids[static_cast<std::size_t>(j)]);
        s.test_indices.push_back(j);
      }
    }
  }
  return s;
}

// run_meta.json accumulates one entry per stage executed in the directory;
// it is the only output holding timestamps.
void append_stage_meta(const std::string& outdir, json stage) {
  const std::string path = outdir + "/run_meta.json";
  json meta = json::object();
  {
    std::ifstream is(path);
    if (is.good()) {
      try {
        is >> meta;
      } catch (const json::parse_error&) {
        meta = json::object();
      }
      if (!meta.is_object()) meta = json::object();
    }
  }
  if (!meta.contains("stages") || !meta["stages"].is_array())
    meta["stages"] = json::array();
  meta["stages"].push_back(std::move(stage));
  std::ofstream os(path);
  io_check(os.good(), "cannot open " + path);
  os << meta.dump(2) << "\n";
  io_check(os.good(), "failed writing " + path);
}

struct ModelSource {
  Checkpoint ck;
  std::string path;
  bool trained = false;
};

// Resolution order: explicit cfg.checkpoint, then a checkpoint.bin in the
// output directory that matches the configuration, then training (when
// allowed). Mismatched explicit checkpoints are an error, mismatched local
// ones are retrained over.
ModelSource obtain_checkpoint(const ExperimentConfig& cfg, const std::string& outdir,
                              const std::vector<RealImage>* train_images,
                              bool allow_train) {
  ModelSource src;
  TrainConfig tcfg = cfg.train;
  if (!cfg.checkpoint.empty()) {
    src.path = cfg.checkpoint;
    src.ck = load_checkpoint(src.path);
    io_check(same_model(src.ck.model, cfg.model),
            src.path + ": checkpoint architecture differs from the configured model");
    io_check(same_schedule(src.ck.schedule, cfg.schedule),
            src.path + ": checkpoint noise schedule differs from the configured schedule");
    return src;
  }
  const std::string local = outdir + "/checkpoint.bin";
  if (fs::exists(local)) {
    Checkpoint ck = load_checkpoint(local);
    if (same_model(ck.model, cfg.model) && same_schedule(ck.schedule, cfg.schedule) &&
        ck.config_hash == score_config_hash(cfg.model, tcfg) &&
        ck.step == tcfg.iterations && !ck.diverged) {
      std::cerr << "reusing " << local << " (step " << ck.step << ")\n";
      src.path = local;
      src.ck = std::move(ck);
      return src;
    }
    io_check(allow_train, local + " does not match the configuration");
    std::cerr << local << " does not match the configuration; retraining\n";
  }
  io_check(allow_train, "no checkpoint available; run train first or set checkpoint");
  io_check(cfg.train_if_missing, "no checkpoint available and train_if_missing is off");
  require(train_images != nullptr && !train_images->empty(),
          "training requires a non-empty training split");
  tcfg.loss_log_path = outdir + "/train_loss.csv";
  tcfg.checkpoint_path = local;
  std::vector<ComplexImage> train_set;
  train_set.reserve(train_images->size());
  for (const RealImage& im : *train_images) train_set.push_back(to_complex(im));
  TrainResult tr = train(train_set, cfg.model, tcfg);
  if (tr.checkpoint.diverged)
    std::cerr << "training diverged at step " << tr.checkpoint.step
              << "; keeping the last stable snapshot\n";
  save_checkpoint(tr.checkpoint, local);
  src.ck = std::move(tr.checkpoint);
  src.path = local;
  src.trained = true;
  return src;
}

struct SimOutcome {
  CorruptionResult cor;
  json entry;
  double wall_seconds = 0.0;
};

SimOutcome simulate_one(const ExperimentConfig& cfg, const std::string& id,
                        long index, const RealImage& clean) {
  SimOutcome out;
  const std::uint64_t sim_seed = stream_seed(cfg.seed, kSimulateStream, index);
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(sim_seed);
  const ComplexImage x = to_complex(clean);
  out.entry = json{{"id", id},
                   {"index", index},
                   {"sim_seed", sim_seed},
                   {"recon_seed", stream_seed(cfg.seed, kReconstructStream, index)}};
  if (cfg.motion_type == "rigid") {
    const RigidMotionParams p =
        sample_rigid_params(cfg.ranges, axis_extent(x, cfg.ranges.axis), rng);
    out.cor = corrupt_rigid(x, p);
    out.entry["k0"] = p.k0;
    out.entry["alpha_deg"] =
        std::vector<double>(p.alpha_deg.data(), p.alpha_deg.data() + p.alpha_deg.size());
    out.entry["delta_y_px"] =
        std::vector<double>(p.delta_y.data(), p.delta_y.data() + p.delta_y.size());
    out.entry["delta_x_px"] =
        std::vector<double>(p.delta_x.data(), p.delta_x.data() + p.delta_x.size());
  } else {
    const RespiratoryMotionParams p = sample_respiratory_params(cfg.ranges, rng);
    out.cor = corrupt_respiratory(x, p);
    out.entry["k0"] = p.k0;
    out.entry["delta_px"] = p.delta;
    out.entry["m"] = p.m;
    out.entry["n"] = p.n;
  }
  out.wall_seconds = seconds_since(t0);
  return out;
}

// clean | corrupted | reconstructed | 5x absolute difference, white gaps.
RealImage make_panel(const RealImage& clean, const RealImage& corrupted,
                     const RealImage& recon) {
  const Eigen::Index h = clean.rows();
  const Eigen::Index w = clean.cols();
  const Eigen::Index gap = 2;
  RealImage panel = RealImage::Constant(h, 4 * w + 3 * gap, 1.0);
  panel.block(0, 0, h, w) = clean;
  panel.block(0, w + gap, h, w) = corrupted;
  panel.block(0, 2 * (w + gap), h, w) = recon;
  panel.block(0, 3 * (w + gap), h, w) = ((recon - clean).abs() * 5.0).min(1.0);
  return panel;
}

void require_field(const std::string& s, const char* what) {
  require(s.find(',') == std::string::npos && s.find('\n') == std::string::npos &&
              s.find('\r') == std::string::npos,
          std::string(what) + " must not contain commas or line breaks");
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream os(path);
  io_check(os.good(), "cannot open " + path);
  os << j.dump(2) << "\n";
  io_check(os.good(), "failed writing " + path);
}

constexpr const char* kCsvHeader = "image_id,method,config_hash,psnr_db,ssim,wall_seconds";

}  // namespace

MethodStats ExperimentReport::stats(const std::string& method) const {
  MethodStats s;
  s.method = method;
  std::vector<double> ps, ss, ws;
  for (const ReportRow& r : rows)
    if (r.method == method) {
      ps.push_back(r.psnr_db);
      ss.push_back(r.ssim);
      ws.push_back(r.wall_seconds);
    }
  s.count = static_cast<int>(ps.size());
  if (s.count == 0) return s;
  const auto mean = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };
  const auto stdev = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
  };
  s.mean_psnr_db = mean(ps);
  s.std_psnr_db = stdev(ps);
  s.mean_ssim = mean(ss);
  s.std_ssim = stdev(ss);
  s.mean_wall_seconds = mean(ws);
  return s;
}

std::vector<std::string> ExperimentReport::methods() const {
  std::vector<std::string> out;
  for (const ReportRow& r : rows)
    if (std::find(out.begin(), out.end(), r.method) == out.end())
      out.push_back(r.method);
  return out;
}

std::string resolve_output_dir(const std::string& dir) {
  require(!dir.empty(), "output directory must not be empty");
  fs::path p(dir);
  if (p.is_relative()) {
    const char* root = std::getenv("DEMOTION_OUT_ROOT");
    if (root != nullptr && *root != '\0') p = fs::path(root) / p;
  }
  return p.string();
}

std::string run_train(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = normalized(raw);
  const std::string outdir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(outdir);
  const std::string started = iso_utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  Split split = load_split(cfg);
  io_check(!split.train_images.empty(), "training split is empty");
  TrainConfig tcfg = cfg.train;
  tcfg.loss_log_path = outdir + "/train_loss.csv";
  tcfg.checkpoint_path = outdir + "/checkpoint.bin";
  std::vector<ComplexImage> train_set;
  train_set.reserve(split.train_images.size());
  for (const RealImage& im : split.train_images) train_set.push_back(to_complex(im));

  TrainResult tr = train(train_set, cfg.model, tcfg);
  if (tr.checkpoint.diverged)
    std::cerr << "training diverged at step " << tr.checkpoint.step
              << "; keeping the last stable snapshot\n";
  save_checkpoint(tr.checkpoint, tcfg.checkpoint_path);
  save_config(cfg, outdir + "/config.json");
  append_stage_meta(outdir, json{{"stage", "train"},
                                 {"started_at", started},
                                 {"finished_at", iso_utc_now()},
                                 {"wall_seconds", seconds_since(t0)},
                                 {"config_hash", hash_hex(config_hash(cfg))},
                                 {"checkpoint", tcfg.checkpoint_path},
                                 {"steps", tr.checkpoint.step},
                                 {"diverged", tr.checkpoint.diverged},
                                 {"final_loss", tr.losses.empty() ? 0.0 : tr.losses.back()}});
  return tcfg.checkpoint_path;
}

ExperimentReport run_simulate(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = normalized(raw);
  ExperimentReport report;
  report.output_dir = resolve_output_dir(cfg.output_dir);
  report.config_hash = config_hash(cfg);
  fs::create_directories(report.output_dir + "/clean");
  fs::create_directories(report.output_dir + "/corrupted");
  const std::string started = iso_utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  Split split = load_split(cfg);
  save_config(cfg, report.output_dir + "/config.json");
  json entries = json::array();
  for (std::size_t j = 0; j < split.test_images.size(); ++j) {
    const std::string& id = split.test_ids[j];
    try {
      SimOutcome sim = simulate_one(cfg, id, split.test_indices[j], split.test_images[j]);
      save_npy(split.test_images[j], report.output_dir + "/clean/" + id + ".npy");
      save_npy(sim.cor.kspace, report.output_dir + "/corrupted/" + id + ".npy");
      entries.push_back(std::move(sim.entry));
    } catch (const std::exception& e) {
      report.failures.push_back(id + ": " + e.what());
    }
  }
  write_json_file(json{{"motion_type", cfg.motion_type},
                       {"axis", axis_name(cfg.axis)},
                       {"images", std::move(entries)}},
                  report.output_dir + "/sim_params.json");
  append_stage_meta(report.output_dir,
                    json{{"stage", "simulate"},
                         {"started_at", started},
                         {"finished_at", iso_utc_now()},
                         {"wall_seconds", seconds_since(t0)},
                         {"config_hash", hash_hex(report.config_hash)},
                         {"images", split.test_images.size() - report.failures.size()},
                         {"failures", report.failures}});
  return report;
}

ExperimentReport run_reconstruct(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = normalized(raw);
  ExperimentReport report;
  report.output_dir = resolve_output_dir(cfg.output_dir);
  report.config_hash = config_hash(cfg);
  const std::string sp_path = report.output_dir + "/sim_params.json";
  json sp;
  {
    std::ifstream is(sp_path);
    io_check(is.good(), "missing " + sp_path + "; run simulate first");
    try {
      is >> sp;
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(sp_path + ": " + e.what());
    }
  }
  io_check(sp.at("axis").get<std::string>() == axis_name(cfg.axis),
          "simulated phase axis differs from the configured axis");

  ModelSource src = obtain_checkpoint(cfg, report.output_dir, nullptr, false);
  std::unique_ptr<ScoreModel> model = load_model(src.ck, true);
  fs::create_directories(report.output_dir + "/recon");
  const std::string started = iso_utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  std::size_t done = 0;
  for (const json& e : sp.at("images")) {
    const std::string id = e.at("id").get<std::string>();
    try {
      const KSpace y = load_npy_complex(report.output_dir + "/corrupted/" + id + ".npy");
      const ComplexImage x0 = ifft2c(y);
      SamplerConfig scfg = cfg.sampler;
      scfg.seed = e.at("recon_seed").get<std::uint64_t>();
      ReconstructionResult rr = reconstruct(x0, y, *model, scfg);
      save_npy(rr.output, report.output_dir + "/recon/" + id + ".npy");
      ++done;
    } catch (const std::exception& ex) {
      report.failures.push_back(id + ": " + ex.what());
    }
  }
  append_stage_meta(report.output_dir,
                    json{{"stage", "reconstruct"},
                         {"started_at", started},
                         {"finished_at", iso_utc_now()},
                         {"wall_seconds", seconds_since(t0)},
                         {"config_hash", hash_hex(report.config_hash)},
                         {"checkpoint", src.path},
                         {"images", done},
                         {"failures", report.failures}});
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = normalized(raw);
  ExperimentReport report;
  report.output_dir = resolve_output_dir(cfg.output_dir);
  report.config_hash = config_hash(cfg);
  fs::create_directories(report.output_dir);
  const std::string started = iso_utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  Split split = load_split(cfg);
  ModelSource src = obtain_checkpoint(cfg, report.output_dir, &split.train_images, true);
  std::unique_ptr<ScoreModel> model = load_model(src.ck, true);
  save_config(cfg, report.output_dir + "/config.json");

  if (cfg.save_arrays) {
    fs::create_directories(report.output_dir + "/clean");
    fs::create_directories(report.output_dir + "/corrupted");
    fs::create_directories(report.output_dir + "/recon");
  }
  if (cfg.save_panels) fs::create_directories(report.output_dir + "/panels");

  json entries = json::array();
  for (std::size_t j = 0; j < split.test_images.size(); ++j) {
    const std::string& id = split.test_ids[j];
    const RealImage& clean = split.test_images[j];
    try {
      SimOutcome sim = simulate_one(cfg, id, split.test_indices[j], clean);
      const RealImage corrupted_disp = display_real(sim.cor.image);

      SamplerConfig scfg = cfg.sampler;
      scfg.seed = sim.entry.at("recon_seed").get<std::uint64_t>();
      ReconstructionResult rr = reconstruct(sim.cor.image, sim.cor.kspace, *model, scfg);
      const RealImage recon_disp = display_real(rr.output);

      report.rows.push_back({id, "corrupted", report.config_hash,
                             psnr(corrupted_disp, clean), ssim(corrupted_disp, clean),
                             sim.wall_seconds});
      report.rows.push_back({id, "reconstructed", report.config_hash,
                             psnr(recon_disp, clean), ssim(recon_disp, clean),
                             rr.wall_seconds});

      if (cfg.save_arrays) {
        save_npy(clean, report.output_dir + "/clean/" + id + ".npy");
        save_npy(sim.cor.kspace, report.output_dir + "/corrupted/" + id + ".npy");
        save_npy(rr.output, report.output_dir + "/recon/" + id + ".npy");
      }
      if (cfg.save_panels)
        save_pgm(make_panel(clean, corrupted_disp, recon_disp),
                 report.output_dir + "/panels/" + id + ".pgm");
      entries.push_back(std::move(sim.entry));
    } catch (const std::exception& e) {
      report.failures.push_back(id + ": " + e.what());
    }
  }

  write_metrics_csv(report.rows, report.output_dir + "/metrics.csv");
  write_summary(report, report.output_dir + "/summary.md");
  write_json_file(json{{"motion_type", cfg.motion_type},
                       {"axis", axis_name(cfg.axis)},
                       {"images", std::move(entries)}},
                  report.output_dir + "/sim_params.json");
  append_stage_meta(report.output_dir,
                    json{{"stage", "evaluate"},
                         {"started_at", started},
                         {"finished_at", iso_utc_now()},
                         {"wall_seconds", seconds_since(t0)},
                         {"config_hash", hash_hex(report.config_hash)},
                         {"checkpoint", src.path},
                         {"trained", src.trained},
                         {"images", report.rows.size() / 2},
                         {"failures", report.failures}});
  return report;
}

ExperimentReport run_report(const std::string& run_dir) {
  ExperimentReport report;
  report.output_dir = resolve_output_dir(run_dir);
  const ExperimentConfig cfg = load_config(report.output_dir + "/config.json");
  report.config_hash = config_hash(cfg);
  report.rows = read_metrics_csv(report.output_dir + "/metrics.csv");
  for (const ReportRow& r : report.rows)
    io_check(r.config_hash == report.config_hash,
            "config hash mismatch in metrics row " + r.image_id + "/" + r.method);
  write_summary(report, report.output_dir + "/summary.md");
  return report;
}

std::string AblationCell::label() const {
  return "np" + std::to_string(n_prime) + "_m" + std::to_string(m_repeats) +
         "_lam" + fmt_compact(lambda_n_prime);
}

std::vector<AblationCell> default_ablation_grid() {
  return {
      {0.01, 10, 3},   // defaults
      {0.0, 10, 3},   {0.1, 10, 3},    // consistency weight
      {0.01, 1, 3},   {0.01, 100, 3},  // reverse depth
      {0.01, 10, 1},  {0.01, 10, 5},   // repeats
      {0.01, 30, 1},  // same step budget as 10 x 3
  };
}

ExperimentReport ablate(const ExperimentConfig& raw, const std::vector<AblationCell>& grid) {
  const ExperimentConfig cfg = normalized(raw);
  require(!grid.empty(), "ablation grid is empty");
  ExperimentReport combined;
  combined.output_dir = resolve_output_dir(cfg.output_dir);
  combined.config_hash = config_hash(cfg);
  fs::create_directories(combined.output_dir);
  const std::string started = iso_utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  Split split = load_split(cfg);
  ModelSource src = obtain_checkpoint(cfg, combined.output_dir, &split.train_images, true);
  save_config(cfg, combined.output_dir + "/config.json");

  std::vector<AblationCell> cells;
  std::set<std::string> seen;
  for (const AblationCell& c : grid)
    if (seen.insert(c.label()).second) cells.push_back(c);

  std::ofstream summary_csv(combined.output_dir + "/ablation_summary.csv", std::ios::binary);
  io_check(summary_csv.good(), "cannot open ablation_summary.csv");
  summary_csv << "label,lambda_n_prime,n_prime,m_repeats,config_hash,images,"
                 "mean_psnr_db,std_psnr_db,mean_ssim,std_ssim,mean_wall_seconds\n";

  std::vector<std::string> labels;
  for (const AblationCell& cell : cells) {
    labels.push_back(cell.label());
    ExperimentConfig cc = cfg;
    cc.sampler.lambda_n_prime = cell.lambda_n_prime;
    cc.sampler.n_prime = cell.n_prime;
    cc.sampler.m_repeats = cell.m_repeats;
    cc.checkpoint = src.path;
    cc.output_dir = combined.output_dir + "/cells/" + cell.label();
    cc.save_panels = false;
    try {
      ExperimentReport r = run_experiment(cc);
      for (const ReportRow& row : r.rows)
        if (row.method == "reconstructed")
          combined.rows.push_back({row.image_id, cell.label(), row.config_hash,
                                   row.psnr_db, row.ssim, row.wall_seconds});
      for (const std::string& f : r.failures)
        combined.failures.push_back(cell.label() + "/" + f);
      const MethodStats st = r.stats("reconstructed");
      summary_csv << cell.label() << ',' << fmt_compact(cell.lambda_n_prime) << ','
                  << cell.n_prime << ',' << cell.m_repeats << ','
                  << hash_hex(r.config_hash) << ',' << st.count << ','
                  << fmt_fixed(st.mean_psnr_db, 9) << ',' << fmt_fixed(st.std_psnr_db, 9) << ','
                  << fmt_fixed(st.mean_ssim, 9) << ',' << fmt_fixed(st.std_ssim, 9) << ','
                  << fmt_fixed(st.mean_wall_seconds, 6) << '\n';
    } catch (const std::exception& e) {
      combined.failures.push_back(cell.label() + ": " + e.what());
    }
  }
  io_check(summary_csv.good(), "failed writing ablation_summary.csv");
  summary_csv.close();
  append_stage_meta(combined.output_dir,
                    json{{"stage", "ablate"},
                         {"started_at", started},
                         {"finished_at", iso_utc_now()},
                         {"wall_seconds", seconds_since(t0)},
                         {"config_hash", hash_hex(combined.config_hash)},
                         {"checkpoint", src.path},
                         {"trained", src.trained},
                         {"cells", labels},
                         {"failures", combined.failures}});
  return combined;
}

void write_metrics_csv(const std::vector<ReportRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  io_check(os.good(), "cannot open " + path);
  os << kCsvHeader << '\n';
  for (const ReportRow& r : rows) {
    require_field(r.image_id, "image_id");
    require_field(r.method, "method");
    os << r.image_id << ',' << r.method << ',' << hash_hex(r.config_hash) << ','
       << fmt_fixed(r.psnr_db, 9) << ',' << fmt_fixed(r.ssim, 9) << ','
       << fmt_fixed(r.wall_seconds, 6) << '\n';
  }
  io_check(os.good(), "failed writing " + path);
}

std::vector<ReportRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  io_check(is.good(), "cannot open " + path);
  std::string line;
  io_check(static_cast<bool>(std::getline(is, line)), path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  io_check(line == kCsvHeader, path + ": unexpected CSV header");
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    io_check(f.size() == 6, path + ": malformed row '" + line + "'");
    ReportRow r;
    r.image_id = f[0];
    r.method = f[1];
    r.config_hash = std::stoull(f[2], nullptr, 16);
    r.psnr_db = std::stod(f[3]);
    r.ssim = std::stod(f[4]);
    r.wall_seconds = std::stod(f[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary(const ExperimentReport& report, const std::string& path) {
  std::set<std::string> ids;
  for (const ReportRow& r : report.rows) ids.insert(r.image_id);
  std::ofstream os(path, std::ios::binary);
  io_check(os.good(), "cannot open " + path);
  os << "# Run summary\n\n";
  os << "- config hash: `" << hash_hex(report.config_hash) << "`\n";
  os << "- images: " << ids.size() << "\n";
  os << "- failures: " << report.failures.size() << "\n\n";
  os << "| method | count | PSNR (dB) | SSIM |\n";
  os << "| --- | --- | --- | --- |\n";
  for (const std::string& m : report.methods()) {
    const MethodStats s = report.stats(m);
    os << "| " << m << " | " << s.count << " | " << fmt_fixed(s.mean_psnr_db, 2)
       << " +/- " << fmt_fixed(s.std_psnr_db, 2) << " | " << fmt_fixed(s.mean_ssim, 4)
       << " +/- " << fmt_fixed(s.std_ssim, 4) << " |\n";
  }
  if (!report.failures.empty()) {
    os << "\n## Failures\n\n";
    for (const std::string& f : report.failures) os << "- " << f << "\n";
  }
  io_check(os.good(), "failed writing " + path);
}

}  // namespace demotion
