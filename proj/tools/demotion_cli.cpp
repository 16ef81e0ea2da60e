#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "demotion/harness/dataset.hpp"
#include "demotion/harness/experiment.hpp"

namespace {

using namespace demotion;

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file (defaults when omitted)");
  cmd->add_option("-s,--set", c.sets, "override, e.g. sampler.n_prime=20 (repeatable)");
}

ExperimentConfig cli_config(const Common& c) {
  if (!c.config.empty()) return load_config(c.config, c.sets);
  return apply_overrides(default_config(), c.sets);
}

void print_report(const ExperimentReport& r) {
  for (const std::string& m : r.methods()) {
    const MethodStats s = r.stats(m);
    std::printf("%-16s n=%-4d psnr %7.2f +/- %5.2f dB   ssim %.4f +/- %.4f   %.2f s/image\n",
                m.c_str(), s.count, s.mean_psnr_db, s.std_psnr_db, s.mean_ssim,
                s.std_ssim, s.mean_wall_seconds);
  }
  for (const std::string& f : r.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
}

int finish(const ExperimentReport& r) {
  print_report(r);
  std::printf("outputs: %s\n", r.output_dir.c_str());
  return r.failures.empty() ? 0 : 2;
}

AblationCell parse_cell(const std::string& text) {
  AblationCell c;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%d:%d%c", &c.lambda_n_prime, &c.n_prime,
                  &c.m_repeats, &tail) != 3)
    throw std::invalid_argument("cell must look like lambda:n_prime:m_repeats, got '" +
                                text + "'");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-based reconstruction of motion-corrupted MRI"};
  app.require_subcommand(1);

  Common train_opts, sim_opts, rec_opts, eval_opts, abl_opts;
  auto* train_cmd = app.add_subcommand("train", "Train the score model and write a checkpoint");
  add_common(train_cmd, train_opts);
  auto* sim_cmd = app.add_subcommand("simulate", "Corrupt the test split and write k-space arrays");
  add_common(sim_cmd, sim_opts);
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct a simulated test set with an existing checkpoint");
  add_common(rec_cmd, rec_opts);
  auto* eval_cmd = app.add_subcommand("evaluate", "Full pipeline: train or load, corrupt, reconstruct, score");
  add_common(eval_cmd, eval_opts);
  auto* abl_cmd = app.add_subcommand("ablate", "Sweep sampler settings against one checkpoint");
  add_common(abl_cmd, abl_opts);
  std::vector<std::string> cell_specs;
  abl_cmd->add_option("--cell", cell_specs,
                      "grid cell lambda:n_prime:m_repeats (repeatable); default sweep when omitted");

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Recompute the summary of an existing run directory");
  report_cmd->add_option("dir", report_dir, "run directory")->required();

  std::string phantom_out;
  int phantom_count = 16;
  int phantom_size = 64;
  std::uint64_t phantom_seed = 0;
  auto* phantom_cmd = app.add_subcommand("phantom", "Write synthetic phantom images as 16-bit PGM");
  phantom_cmd->add_option("-o,--out", phantom_out, "target directory")->required();
  phantom_cmd->add_option("-n,--count", phantom_count, "number of images");
  phantom_cmd->add_option("--size", phantom_size, "image side length");
  phantom_cmd->add_option("--seed", phantom_seed, "generator seed");

  std::string init_out = "config.json";
  auto* init_cmd = app.add_subcommand("init", "Write the default config file");
  init_cmd->add_option("-o,--out", init_out, "target path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) {
      const std::string path = run_train(cli_config(train_opts));
      std::printf("checkpoint: %s\n", path.c_str());
      return 0;
    }
    if (*sim_cmd) return finish(run_simulate(cli_config(sim_opts)));
    if (*rec_cmd) return finish(run_reconstruct(cli_config(rec_opts)));
    if (*eval_cmd) return finish(run_experiment(cli_config(eval_opts)));
    if (*abl_cmd) {
      std::vector<AblationCell> grid;
      for (const std::string& spec : cell_specs) grid.push_back(parse_cell(spec));
      if (grid.empty()) grid = default_ablation_grid();
      return finish(ablate(cli_config(abl_opts), grid));
    }
    if (*report_cmd) {
      print_report(run_report(report_dir));
      return 0;
    }
    if (*phantom_cmd) {
      const std::string dir = resolve_output_dir(phantom_out);
      std::filesystem::create_directories(dir);
      const std::vector<RealImage> images =
          make_phantom_dataset(phantom_count, phantom_size, phantom_seed);
      for (std::size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "/phantom_%04zu.pgm", i);
        save_pgm(images[i], dir + name, 16);
      }
      std::printf("wrote %zu images to %s\n", images.size(), dir.c_str());
      return 0;
    }
    if (*init_cmd) {
      save_config(default_config(), init_out);
      std::printf("wrote %s\n", init_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
