#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ld3/error.hpp"
#include "ld3/eval.hpp"
#include "ld3/io.hpp"
#include "ld3/rng.hpp"
#include "ld3/trainer.hpp"

namespace ld3::cli {

namespace {

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

void write_file(const fs::path& file, const std::string& text) {
  ensure_parent(file);
  write_text_file(file, text);
}

Dataset dataset_for(const RunConfig& cfg, const Denoiser& den, const std::optional<fs::path>& path,
                    int jobs) {
  if (!path) return generate_dataset(den, cfg.schedule, cfg.teacher, cfg.train_count, cfg.seed, jobs);
  auto data = load_dataset(*path);
  if (data.d != cfg.data_d) {
    throw ConfigError("dataset dimension " + std::to_string(data.d) + " differs from data.d");
  }
  if (data.schedule_hash != cfg.schedule.hash()) {
    throw ConfigError("dataset was generated with a different schedule");
  }
  return data;
}

std::string teacher_label(const TeacherSpec& t) {
  return t.solver.label() + " nfe=" + std::to_string(t.solver.nfe) + " grid=" +
         std::string(to_string(t.grid));
}

}  // namespace

RunConfig load_run_config(const std::optional<fs::path>& path, std::optional<std::uint64_t> seed) {
  if (path && !fs::is_regular_file(*path)) throw ConfigError("cannot read config file " + path->string());
  RunConfig cfg = path ? RunConfig::parse(read_text_file(*path)) : RunConfig();
  if (seed) cfg.seed = *seed;
  return cfg;
}

void gen_data(const RunConfig& cfg, const fs::path& out, int jobs, std::ostream& log) {
  const auto den = cfg.make_denoiser();
  const auto data = generate_dataset(*den, cfg.schedule, cfg.teacher, cfg.train_count, cfg.seed, jobs);
  ensure_parent(out);
  save_dataset(out, data);
  log << "wrote " << data.pairs.size() << " pairs, d=" << data.d << ", teacher "
      << teacher_label(cfg.teacher) << " to " << out.string() << '\n';
}

bool train(const RunConfig& cfg, const std::optional<fs::path>& data_path, const fs::path& out_dir,
           int jobs, std::ostream& log) {
  const auto den = cfg.make_denoiser();
  auto data = dataset_for(cfg, *den, data_path, jobs);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.txt", cfg.snapshot());

  auto tc = cfg.train;
  tc.seed = cfg.seed;
  const auto report = ld3::train(tc, data, *den, cfg.schedule, cfg.solver, std::nullopt, {}, jobs);

  std::ostringstream metrics;
  write_metrics_csv(metrics, report, cfg.record_wall_time);
  write_text_file(out_dir / "metrics.csv", metrics.str());
  if (report.diverged) {
    log << "training diverged: " << report.error << '\n';
    return false;
  }
  save_checkpoint(out_dir / "checkpoint.json", {report.best, cfg.solver, report.best_val_loss});
  log << "init " << to_string(report.init.chosen) << ", best val loss "
      << format_real(report.best_val_loss) << " at epoch " << report.best_epoch << '\n';
  return true;
}

void sample(const RunConfig& cfg, const fs::path& checkpoint, std::size_t n, const fs::path& out,
            int jobs) {
  const auto ckpt = load_checkpoint(checkpoint);
  if (ckpt.solver.family != cfg.solver.family || ckpt.solver.order != cfg.solver.order) {
    throw ConfigError("checkpoint was trained with " + ckpt.solver.label() +
                      " but solver is configured as " + cfg.solver.label());
  }
  if (ckpt.disc.steps() != ckpt.solver.nfe) throw ConfigError("checkpoint grid does not match its nfe");
  if (ckpt.disc.T != cfg.schedule.T || ckpt.disc.t_min != cfg.schedule.t_min) {
    throw ConfigError("checkpoint time range differs from the configured schedule");
  }
  const auto den = cfg.make_denoiser();
  const auto map = SolverMap::learned(ckpt.solver, ckpt.disc);
  const auto xs = sample_prior(cfg.schedule, derive_seed(cfg.seed, "sample"), n, den->dim());
  const auto ys = map.run(*den, cfg.schedule, xs, jobs);

  std::ostringstream os;
  for (std::size_t j = 0; j < den->dim(); ++j) os << (j ? "," : "") << 'x' << j;
  os << '\n';
  for (const auto& y : ys) {
    for (std::size_t j = 0; j < y.size(); ++j) os << (j ? "," : "") << format_real(y[j]);
    os << '\n';
  }
  write_file(out, os.str());
}

void bench(const RunConfig& cfg, const fs::path& out, int jobs, std::ostream& log) {
  const auto den = cfg.make_denoiser();
  DataSampler sampler;
  if (cfg.denoiser_kind == "analytic" && cfg.data_kind == "gm") {
    sampler = [gm = cfg.mixture()](std::size_t count, std::uint64_t seed) {
      Samples s;
      s.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        Rng rng(seed, i);
        s.push_back(gm.sample(rng));
      }
      return s;
    };
  } else if (cfg.denoiser_kind == "analytic") {
    sampler = [x0 = cfg.data_means](std::size_t count, std::uint64_t) { return Samples(count, x0); };
  }
  const auto rows = ld3::bench(cfg.bench_setup(), *den, cfg.schedule, sampler, jobs);
  std::ostringstream os;
  write_bench_csv(os, rows);
  write_file(out, os.str());
  log << "wrote " << rows.size() << " bench rows to " << out.string() << '\n';
}

void sweep_r(const RunConfig& cfg, const std::optional<fs::path>& data_path, const fs::path& out,
             int jobs, std::ostream& log) {
  const auto den = cfg.make_denoiser();
  const auto data = dataset_for(cfg, *den, data_path, jobs);
  auto tc = cfg.train;
  tc.seed = cfg.seed;
  const auto rows = ld3::sweep_r(tc, data, *den, cfg.schedule, cfg.solver, cfg.eval_r_values, jobs);
  std::ostringstream os;
  os << "r,best_val_loss,val_hard_loss\n";
  for (const auto& r : rows) {
    os << format_real(r.r) << ',' << format_real(r.best_val_loss) << ','
       << format_real(r.val_hard_loss) << '\n';
  }
  write_file(out, os.str());
  log << "wrote " << rows.size() << " sweep rows to " << out.string() << '\n';
}

void bound(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& out,
           int jobs, std::ostream& log) {
  const auto den = cfg.make_denoiser();
  const auto teacher = SolverMap::teacher(cfg.teacher, cfg.schedule);
  SolverMap student;
  if (checkpoint) {
    const auto ckpt = load_checkpoint(*checkpoint);
    student = SolverMap::learned(ckpt.solver, ckpt.disc);
  } else {
    student = SolverMap::heuristic(cfg.solver, cfg.teacher.grid, cfg.schedule);
  }
  const auto report = estimate_bound(*den, cfg.schedule, teacher, student, cfg.eval_bound_r,
                                     cfg.eval_bound_samples, cfg.seed, jobs);
  write_file(out, bound_to_json(report));
  log << "term1 " << format_real(report.term1) << ", term2 " << format_real(report.term2)
      << ", term3 " << format_real(report.term3) << '\n';
}

void cross_eval(const RunConfig& cfg, const std::optional<fs::path>& data_path, const fs::path& out,
                int jobs, std::ostream& log) {
  const auto den = cfg.make_denoiser();
  const auto data = dataset_for(cfg, *den, data_path, jobs);
  std::vector<SolverSpec> families = cfg.eval_families;
  for (auto& f : families) f.nfe = cfg.solver.nfe;

  std::vector<TrainedGrid> grids;
  for (const auto& spec : families) {
    auto local = data;
    auto tc = cfg.train;
    tc.seed = cfg.seed;
    const auto report = ld3::train(tc, local, *den, cfg.schedule, spec, std::nullopt, {}, jobs);
    if (report.diverged) throw TrainingDivergedError(report.error, 0);
    grids.push_back({spec, report.best});
  }
  const auto m = ld3::cross_eval(grids, families, data, *den, cfg.schedule, jobs);
  std::ostringstream os;
  os << "trained,evaluated,teacher_dist\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      os << families[i].label() << ',' << families[j].label() << ',' << format_real(m[i][j]) << '\n';
    }
  }
  write_file(out, os.str());
  log << "wrote " << m.size() << "x" << m.size() << " transfer matrix to " << out.string() << '\n';
}

void train_mlp(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  auto dsm = cfg.mlp;
  dsm.seed = cfg.seed;
  const auto result = train_mlp_dsm(cfg.mixture(), cfg.schedule, dsm);
  write_file(out, mlp_to_json(result.model));
  log << "final dsm loss " << format_real(result.loss_trace.back()) << '\n';
}

}  // namespace ld3::cli
