#pragma once

// Gradients of a terminal loss through a full solver run, either by recording
// the whole chain on one tape or by rematerialization: only the step-boundary
// states are kept from a plain forward pass, and each step's internal
// operations (denoiser included) are re-recorded on a fresh tape during the
// backward sweep.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ld3/solvers.hpp"

namespace ld3 {

/// Terminal loss of the final sample; writes d(loss)/dx into grad.
using TerminalLoss = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// (1/d) |x - target|^2.
TerminalLoss squared_l2_loss(std::vector<double> target);

struct RematStats {
  std::size_t stored_states = 0;    // step-boundary states held across the sweep
  std::size_t peak_tape_nodes = 0;  // largest tape alive at any moment
  std::size_t replayed_steps = 0;
  bool replay_exact = true;         // replayed x_{i+1} bit-identical to the forward pass
};

struct SolveGradient {
  double loss = 0.0;
  std::vector<double> x_final;
  std::vector<double> d_times;
  std::vector<double> d_times_c;
  std::vector<double> d_x;
  RematStats stats;
};

SolveGradient checkpointed_solve_grad(const Denoiser& den, const NoiseSchedule& sched,
                                      const SolverSpec& spec, std::span<const double> times,
                                      std::span<const double> times_c,
                                      std::span<const double> x_T, const TerminalLoss& loss);

/// Reference path: the whole solve recorded on a single tape.
SolveGradient whole_tape_solve_grad(const Denoiser& den, const NoiseSchedule& sched,
                                    const SolverSpec& spec, std::span<const double> times,
                                    std::span<const double> times_c, std::span<const double> x_T,
                                    const TerminalLoss& loss);

}  // namespace ld3
