#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ld3/error.hpp"

namespace {

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file");
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

std::optional<std::filesystem::path> as_path(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  return std::filesystem::path(*s);
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = ld3::cli;
  CLI::App app{"ld3: learned time discretizations for diffusion ODE samplers"};
  app.require_subcommand(1);

  Common common;
  std::string out;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::size_t n = 100;

  auto* gen = app.add_subcommand("gen-data", "generate teacher pairs");
  add_common(gen, common);
  gen->add_option("--out", out, "dataset file")->required();

  auto* tr = app.add_subcommand("train", "train an LD3 grid");
  add_common(tr, common);
  tr->add_option("--data", data, "dataset file (generated from the config if absent)");
  tr->add_option("--out", out, "output directory")->required();

  auto* smp = app.add_subcommand("sample", "sample with a trained grid");
  add_common(smp, common);
  smp->add_option("checkpoint", checkpoint, "checkpoint JSON")->required();
  smp->add_option("--n", n, "number of samples")->check(CLI::PositiveNumber);
  smp->add_option("--out", out, "CSV file")->required();

  auto* bch = app.add_subcommand("bench", "heuristics vs LD3 table");
  add_common(bch, common);
  bch->add_option("--out", out, "CSV file")->required();

  auto* swp = app.add_subcommand("sweep-r", "best loss per ball radius");
  add_common(swp, common);
  swp->add_option("--data", data, "dataset file");
  swp->add_option("--out", out, "CSV file")->required();

  auto* bnd = app.add_subcommand("bound", "KL bound terms");
  add_common(bnd, common);
  bnd->add_option("--checkpoint", checkpoint, "student grid (teacher heuristic if absent)");
  bnd->add_option("--out", out, "JSON file")->required();

  auto* crs = app.add_subcommand("cross-eval", "solver transfer matrix");
  add_common(crs, common);
  crs->add_option("--data", data, "dataset file");
  crs->add_option("--out", out, "CSV file")->required();

  auto* mlp = app.add_subcommand("train-mlp", "fit an MLP denoiser to the mixture");
  add_common(mlp, common);
  mlp->add_option("--out", out, "MLP JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = cli::load_run_config(as_path(common.config), common.seed);
    if (gen->parsed()) {
      cli::gen_data(cfg, out, common.jobs, std::cout);
    } else if (tr->parsed()) {
      if (!cli::train(cfg, as_path(data), out, common.jobs, std::cout)) return 3;
    } else if (smp->parsed()) {
      cli::sample(cfg, *checkpoint, n, out, common.jobs);
    } else if (bch->parsed()) {
      cli::bench(cfg, out, common.jobs, std::cout);
    } else if (swp->parsed()) {
      cli::sweep_r(cfg, as_path(data), out, common.jobs, std::cout);
    } else if (bnd->parsed()) {
      cli::bound(cfg, as_path(checkpoint), out, common.jobs, std::cout);
    } else if (crs->parsed()) {
      cli::cross_eval(cfg, as_path(data), out, common.jobs, std::cout);
    } else if (mlp->parsed()) {
      cli::train_mlp(cfg, out, std::cout);
    }
  } catch (const ld3::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
