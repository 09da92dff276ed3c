#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ld3/denoiser.hpp"
#include "ld3/eval.hpp"
#include "ld3/mlp.hpp"
#include "ld3/schedule.hpp"
#include "ld3/solvers.hpp"
#include "ld3/trainer.hpp"

namespace ld3 {

/// Flat `key = value` text with dotted keys. Blank lines and lines starting
/// with '#' are ignored. Later assignments override earlier ones.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Effective configuration for every command. Each key has a default, and
/// unknown keys are rejected with a ConfigError naming the key.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "ld3_out";

  NoiseSchedule schedule;

  std::string data_kind = "gm";  // gm | point
  std::size_t data_d = 2;
  std::vector<double> data_weights;
  std::vector<double> data_means;  // flattened, component-major
  std::vector<double> data_vars;

  std::string denoiser_kind = "analytic";  // analytic | mlp
  std::string denoiser_checkpoint;
  DsmConfig mlp;

  SolverSpec solver;
  TeacherSpec teacher;

  std::size_t train_count = 100;
  TrainConfig train;
  bool record_wall_time = false;

  std::vector<std::size_t> eval_nfe_list{4, 6, 8};
  std::vector<SolverSpec> eval_solvers;
  std::vector<std::string> eval_methods{"uniform", "quadratic", "edm", "logsnr", "ld3"};
  std::size_t eval_count = 200;
  std::size_t eval_reference_nfe = 100;
  std::vector<double> eval_r_values{0.0, 0.01, 0.1, 1.0, 5.0};
  double eval_bound_r = 0.1;
  std::size_t eval_bound_samples = 100;
  std::vector<SolverSpec> eval_families;

  RunConfig();

  /// Applies `key = value` text on top of the defaults.
  static RunConfig parse(std::string_view text);
  /// Every key with its effective value, sorted by key. parse(snapshot())
  /// reproduces the same configuration.
  std::string snapshot() const;

  static const std::vector<std::string>& known_keys();

  GaussianMixture mixture() const;
  /// Analytic denoiser for the configured data, or the MLP checkpoint.
  std::unique_ptr<Denoiser> make_denoiser() const;
  BenchSetup bench_setup() const;
};

}  // namespace ld3
