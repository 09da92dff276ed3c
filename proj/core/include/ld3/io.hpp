#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "ld3/discretize.hpp"
#include "ld3/eval.hpp"
#include "ld3/mlp.hpp"
#include "ld3/solvers.hpp"
#include "ld3/trainer.hpp"

namespace ld3 {

// Dataset binary layout (little-endian):
//   "LD3D" | u32 version = 1 | u32 d | u32 count | u64 schedule hash | u64 seed
//   then `count` records of 3 d IEEE-754 doubles: x_T, x'_T, y.
inline constexpr char kDatasetMagic[4] = {'L', 'D', '3', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 32;

void write_dataset(std::ostream& os, const Dataset& data);
/// Reads a dataset and recomputes its train/validation split from the seed.
/// Throws IoError on a bad magic, version or truncated stream.
Dataset read_dataset(std::istream& is);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

/// Learned grid as stored on disk.
struct GridCheckpoint {
  Discretization disc;
  SolverSpec solver;
  double val_loss = 0.0;
};

/// JSON object {N, T, t_min, xi, xi_c, times, times_c, solver, val_loss}.
std::string checkpoint_to_json(const GridCheckpoint& ckpt);
/// Throws IoError on malformed JSON; GridError if the stored times are not
/// strictly decreasing or disagree with the ones derived from xi.
GridCheckpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const GridCheckpoint& ckpt);
GridCheckpoint load_checkpoint(const std::filesystem::path& path);

/// {kind: "mlp", d, layers: [{in, out, weights (row-major), bias}]}.
std::string mlp_to_json(const MlpDenoiser& model);
MlpDenoiser mlp_from_json(const std::string& text, const NoiseSchedule& sched);

inline constexpr const char* kMetricsCsvHeader =
    "iter,epoch,phase,train_loss,val_loss,lr_xi,lr_xic,wall_s";

/// One row per training iteration followed by one row per epoch (epoch 0 is
/// the initial validation loss). wall_s is written as 0 unless
/// record_wall_time is set, which keeps reruns byte-identical.
void write_metrics_csv(std::ostream& os, const TrainReport& report, bool record_wall_time);

std::string bound_to_json(const BoundReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Shortest round-trip decimal form.
std::string format_real(double v);

}  // namespace ld3
