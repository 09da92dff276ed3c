#include <benchmark/benchmark.h>

#include "ld3/discretize.hpp"
#include "ld3/remat.hpp"
#include "ld3/rng.hpp"
#include "ld3/solvers.hpp"
#include "ld3/trainer.hpp"

namespace {

using namespace ld3;

const NoiseSchedule kVe = NoiseSchedule::ve_edm();

SolverSpec spec_for(int family, std::size_t nfe) {
  switch (family) {
    case 0: return {SolverFamily::Euler, 1, nfe};
    case 1: return {SolverFamily::Dpmpp, 2, nfe};
    default: return {SolverFamily::Ipndm, 4, nfe};
  }
}

void BM_Solve(benchmark::State& state) {
  const GmDenoiser den(default_mixture(), kVe);
  const auto spec = spec_for(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const auto times = heuristic_times(Heuristic::LogSnr, spec.nfe, kVe);
  Rng rng(1);
  const auto x = rng.normal_vector(2, kVe.T);
  for (auto _ : state) benchmark::DoNotOptimize(solve(den, kVe, spec, times, times, x));
  state.SetLabel(spec.label());
}
BENCHMARK(BM_Solve)->ArgsProduct({{0, 1, 2}, {4, 10, 100}});

void BM_CheckpointedGrad(benchmark::State& state) {
  const GmDenoiser den(default_mixture(), kVe);
  const auto spec = spec_for(1, static_cast<std::size_t>(state.range(0)));
  const auto times = heuristic_times(Heuristic::LogSnr, spec.nfe, kVe);
  Rng rng(2);
  const auto x = rng.normal_vector(2, kVe.T);
  const auto loss = squared_l2_loss(rng.normal_vector(2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(checkpointed_solve_grad(den, kVe, spec, times, times, x, loss));
  }
}
BENCHMARK(BM_CheckpointedGrad)->Arg(4)->Arg(10)->Arg(40);

void BM_WholeTapeGrad(benchmark::State& state) {
  const GmDenoiser den(default_mixture(), kVe);
  const auto spec = spec_for(1, static_cast<std::size_t>(state.range(0)));
  const auto times = heuristic_times(Heuristic::LogSnr, spec.nfe, kVe);
  Rng rng(2);
  const auto x = rng.normal_vector(2, kVe.T);
  const auto loss = squared_l2_loss(rng.normal_vector(2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(whole_tape_solve_grad(den, kVe, spec, times, times, x, loss));
  }
}
BENCHMARK(BM_WholeTapeGrad)->Arg(4)->Arg(10)->Arg(40);

void BM_SoftLossGradient(benchmark::State& state) {
  const GmDenoiser den(default_mixture(), kVe);
  const SolverSpec spec{SolverFamily::Dpmpp, 2, 4};
  const auto data = generate_dataset(den, kVe, TeacherSpec{}, 2, 3);
  const auto disc = Discretization::from_xi(init_from_times(heuristic_times(Heuristic::LogSnr, 4, kVe), kVe), kVe);
  for (auto _ : state) benchmark::DoNotOptimize(soft_loss_gradient(disc, data.pairs[0], den, kVe, spec));
}
BENCHMARK(BM_SoftLossGradient);

}  // namespace

BENCHMARK_MAIN();
