#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "ld3/config.hpp"

namespace ld3::cli {

namespace fs = std::filesystem;

/// Reads the config file (defaults when empty) and applies --seed.
RunConfig load_run_config(const std::optional<fs::path>& path, std::optional<std::uint64_t> seed);

/// Writes the teacher dataset; prints count, d and the teacher.
void gen_data(const RunConfig& cfg, const fs::path& out, int jobs, std::ostream& log);

/// Trains LD3 and writes checkpoint.json, metrics.csv and config.txt into
/// out_dir. Without a data file the dataset is generated from the config.
/// Returns false when training diverged.
bool train(const RunConfig& cfg, const std::optional<fs::path>& data, const fs::path& out_dir,
           int jobs, std::ostream& log);

/// Solves n fresh prior draws along the checkpointed grid; one CSV row per
/// sample. Throws ConfigError when the checkpoint solver differs from the
/// configured one.
void sample(const RunConfig& cfg, const fs::path& checkpoint, std::size_t n, const fs::path& out,
            int jobs);

void bench(const RunConfig& cfg, const fs::path& out, int jobs, std::ostream& log);

void sweep_r(const RunConfig& cfg, const std::optional<fs::path>& data, const fs::path& out,
             int jobs, std::ostream& log);

/// Bound terms of the configured solver against the teacher; the student
/// grid comes from the checkpoint if given, otherwise the teacher's
/// heuristic at solver.nfe.
void bound(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& out,
           int jobs, std::ostream& log);

/// Trains one grid per eval.families entry at solver.nfe and writes the
/// transfer matrix as CSV rows (trained,evaluated,teacher_dist).
void cross_eval(const RunConfig& cfg, const std::optional<fs::path>& data, const fs::path& out,
                int jobs, std::ostream& log);

/// Denoising score matching on the configured mixture; writes MLP JSON.
void train_mlp(const RunConfig& cfg, const fs::path& out, std::ostream& log);

}  // namespace ld3::cli
