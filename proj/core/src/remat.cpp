#include "ld3/remat.hpp"

#include <algorithm>
#include <bit>

namespace ld3 {

TerminalLoss squared_l2_loss(std::vector<double> target) {
  return [target = std::move(target)](std::span<const double> x, std::span<double> grad) {
    const double inv_d = 1.0 / static_cast<double>(x.size());
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = x[j] - target[j];
      s += r * r;
      grad[j] = 2.0 * inv_d * r;
    }
    return s * inv_d;
  };
}

namespace {

std::size_t flat_history_size(const SolverState<double>& s) {
  std::size_t n = 0;
  for (const auto& h : s.history) n += h.size();
  return n;
}

}  // namespace

SolveGradient checkpointed_solve_grad(const Denoiser& den, const NoiseSchedule& sched,
                                      const SolverSpec& spec, std::span<const double> times,
                                      std::span<const double> times_c,
                                      std::span<const double> x_T, const TerminalLoss& loss) {
  const auto states = solve_states(den, sched, spec, times, times_c, x_T);
  const std::size_t d = x_T.size();
  const std::size_t n = spec.nfe;

  SolveGradient out;
  out.x_final = states.back().x;
  std::vector<double> adj_x(d);
  out.loss = loss(out.x_final, adj_x);
  std::vector<double> adj_hist(flat_history_size(states.back()), 0.0);
  out.d_times.assign(times.size(), 0.0);
  out.d_times_c.assign(times_c.size(), 0.0);
  out.stats.stored_states = states.size();

  ad::Tape tape;
  for (std::size_t i = n; i-- > 0;) {
    tape.clear();
    const auto& in = states[i];
    SolverState<ad::Var> leaf;
    leaf.x = tape.variables(in.x);
    for (const auto& h : in.history) leaf.history.push_back(tape.variables(h));
    StepTimes<ad::Var> st;
    if (i > 0) {
      st.t_prev = tape.variable(times[i - 1]);
      st.has_prev = true;
    }
    st.t = tape.variable(times[i]);
    st.t_next = tape.variable(times[i + 1]);
    st.t_c = tape.variable(times_c[i]);

    const auto next = solver_step(den, sched, spec, st, leaf);
    out.stats.peak_tape_nodes = std::max(out.stats.peak_tape_nodes, tape.size());
    ++out.stats.replayed_steps;
    for (std::size_t j = 0; j < d; ++j) {
      if (std::bit_cast<std::uint64_t>(next.x[j].value()) !=
          std::bit_cast<std::uint64_t>(states[i + 1].x[j])) {
        out.stats.replay_exact = false;
      }
    }

    std::vector<ad::Var> outputs(next.x.begin(), next.x.end());
    std::vector<double> seeds(adj_x.begin(), adj_x.end());
    for (const auto& h : next.history) outputs.insert(outputs.end(), h.begin(), h.end());
    seeds.insert(seeds.end(), adj_hist.begin(), adj_hist.end());
    tape.backward(outputs, seeds);

    adj_x = tape.adjoints(leaf.x);
    adj_hist.clear();
    for (const auto& h : leaf.history) {
      const auto a = tape.adjoints(h);
      adj_hist.insert(adj_hist.end(), a.begin(), a.end());
    }
    if (st.has_prev) out.d_times[i - 1] += tape.adjoint(st.t_prev);
    out.d_times[i] += tape.adjoint(st.t);
    out.d_times[i + 1] += tape.adjoint(st.t_next);
    out.d_times_c[i] += tape.adjoint(st.t_c);
  }
  out.d_x = std::move(adj_x);
  return out;
}

SolveGradient whole_tape_solve_grad(const Denoiser& den, const NoiseSchedule& sched,
                                    const SolverSpec& spec, std::span<const double> times,
                                    std::span<const double> times_c, std::span<const double> x_T,
                                    const TerminalLoss& loss) {
  ad::Tape tape;
  const auto t = tape.variables(times);
  const auto tc = tape.variables(times_c);
  const auto x = tape.variables(x_T);
  const auto y = solve(den, sched, spec, t, tc, x);

  SolveGradient out;
  out.x_final = ad::values(y);
  std::vector<double> adj(x_T.size());
  out.loss = loss(out.x_final, adj);
  tape.backward(y, adj);
  out.d_times = tape.adjoints(t);
  out.d_times_c = tape.adjoints(tc);
  out.d_x = tape.adjoints(x);
  out.stats.stored_states = 0;
  out.stats.peak_tape_nodes = tape.size();
  out.stats.replayed_steps = 0;
  return out;
}

}  // namespace ld3
