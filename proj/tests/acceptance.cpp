// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ld3/discretize.hpp"
#include "ld3/eval.hpp"
#include "ld3/io.hpp"
#include "ld3/remat.hpp"
#include "ld3/rng.hpp"
#include "ld3/solvers.hpp"
#include "ld3/trainer.hpp"
#include "test_support.hpp"

#ifdef LD3_HAVE_CLI
#include "commands.hpp"
#endif

namespace {

using namespace ld3;

constexpr std::size_t kSeeds = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const NoiseSchedule& ve() {
  static const NoiseSchedule s = NoiseSchedule::ve_edm();
  return s;
}

const GmDenoiser& gm_den() {
  static const GmDenoiser den(default_mixture(), ve());
  return den;
}

Outcome radius_anchor() {
  const auto b = radius(0.001, 3072, 4, ve());
  const bool exact = std::abs(b.r - 0.192) <= 1e-12;
  // 0.19 to two significant figures
  const bool two_sig = std::round(b.r * 100.0) / 100.0 == 0.19;
  const bool rho = std::abs(b.rho - b.r * ve().sigma_max()) <= 1e-12 * b.rho;
  return {exact && two_sig && rho, "r = " + fmt(b.r) + ", rho = " + fmt(b.rho)};
}

double norm_rel(const std::vector<double>& got, const std::vector<double>& fd) {
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff += (got[i] - fd[i]) * (got[i] - fd[i]);
    ref += fd[i] * fd[i];
  }
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

Outcome gradient_suite() {
  const SolverSpec families[] = {{SolverFamily::Euler, 1, 0}, {SolverFamily::Dpmpp, 2, 0},
                                 {SolverFamily::Ipndm, 4, 0}};
  const auto data = generate_dataset(gm_den(), ve(), TeacherSpec{}, 4, 77);
  double worst = 0.0;
  std::size_t cases = 0;
  for (auto spec : families) {
    for (std::size_t nfe : {3u, 4u, 6u}) {
      spec.nfe = nfe;
      Rng rng(nfe, static_cast<std::uint64_t>(spec.family));
      auto disc = Discretization::from_xi(
          init_from_times(heuristic_times(Heuristic::LogSnr, nfe, ve()), ve()), ve());
      for (auto& v : disc.xi) v += 0.2 * rng.normal();
      const auto times = disc.times();
      for (std::size_t i = 0; i < disc.xi_c.size(); ++i) {
        disc.xi_c[i] = i == 0 ? -0.5 : 0.05 * times[i] * rng.normal();
      }
      auto pair = data.pairs[0];
      pair.x_prime[0] += 0.3;
      pair.x_prime[1] -= 0.2;

      const auto g = soft_loss_gradient(disc, pair, gm_den(), ve(), spec);
      const auto fd_xi = testing::central_diff(
          [&](const std::vector<double>& xi) {
            auto d2 = disc;
            d2.xi = xi;
            return soft_loss(d2, pair, gm_den(), ve(), spec);
          },
          disc.xi, 1e-5);
      const auto fd_xc = testing::central_diff(
          [&](const std::vector<double>& xc) {
            auto d2 = disc;
            d2.xi_c = xc;
            return soft_loss(d2, pair, gm_den(), ve(), spec);
          },
          disc.xi_c, 1e-5);
      const auto fd_xp = testing::central_diff(
          [&](const std::vector<double>& xp) {
            auto p2 = pair;
            p2.x_prime = xp;
            return soft_loss(disc, p2, gm_den(), ve(), spec);
          },
          pair.x_prime, 1e-5);
      worst = std::max({worst, norm_rel(g.d_xi, fd_xi), norm_rel(g.d_xi_c, fd_xc),
                        norm_rel(g.d_x_prime, fd_xp)});
      ++cases;
    }
  }
  return {worst <= 1e-4, std::to_string(cases) + " cases, worst rel err " + fmt(worst)};
}

Outcome exactness_oracle() {
  const std::vector<double> x0{1.25, -0.75};
  const PointDenoiser den(x0, ve());
  const double T = ve().T;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    Rng rng(2024, k);
    const std::size_t n = 1 + k % 10;
    const auto times = tau(std::span<const double>(rng.normal_vector(n + 1, 1.5)), ve().t_min, T);
    const auto xT = rng.normal_vector(2, T);
    const auto out = solve(den, ve(), {SolverFamily::Dpmpp, 1, n}, times, times, xT);
    const double t = ve().t_min;
    for (std::size_t j = 0; j < 2; ++j) {
      const double exact = x0[j] + (t / T) * (xT[j] - x0[j]);
      worst = std::max(worst, std::abs(out[j] - exact));
    }
  }
  return {worst <= 1e-10, "100 draws, max abs err " + fmt(worst)};
}

double slope(const std::vector<double>& nfe, const std::vector<double>& err) {
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < nfe.size(); ++i) {
    mx += std::log(nfe[i]);
    my += std::log(err[i]);
  }
  mx /= static_cast<double>(nfe.size());
  my /= static_cast<double>(nfe.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < nfe.size(); ++i) {
    const double dx = std::log(nfe[i]) - mx;
    sxy += dx * (std::log(err[i]) - my);
    sxx += dx * dx;
  }
  return -sxy / sxx;
}

Outcome convergence_orders() {
  const TeacherSpec tight{{SolverFamily::Dpmpp, 2, 400}, Heuristic::LogSnr};
  const auto xs = sample_prior(ve(), 8, 100, 2);
  const auto ys = SolverMap::teacher(tight, ve()).run(gm_den(), ve(), xs, jobs());
  const std::vector<double> nfes{5, 10, 20, 40};
  auto errors = [&](SolverSpec spec) {
    std::vector<double> out;
    for (double n : nfes) {
      spec.nfe = static_cast<std::size_t>(n);
      const auto got = SolverMap::heuristic(spec, Heuristic::LogSnr, ve()).run(gm_den(), ve(), xs, jobs());
      out.push_back(rmsd(got, ys));
    }
    return out;
  };
  const double euler = slope(nfes, errors({SolverFamily::Euler, 1, 0}));
  const double dpmpp = slope(nfes, errors({SolverFamily::Dpmpp, 2, 0}));
  const bool pass = euler >= 0.8 && euler <= 1.2 && dpmpp >= 1.6;
  return {pass, "euler slope " + fmt(euler) + ", dpmpp2 slope " + fmt(dpmpp)};
}

Samples gm_truth(std::size_t count, std::uint64_t seed) {
  const auto gm = default_mixture();
  Samples s;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, i);
    s.push_back(gm.sample(rng));
  }
  return s;
}

Outcome beats_heuristics() {
  BenchSetup setup;
  setup.solvers = {{SolverFamily::Dpmpp, 2, 0}, {SolverFamily::Ipndm, 4, 0}};
  setup.nfe_list = {4, 6, 8};
  std::size_t wins = 0;
  std::size_t cells = 0;
  std::map<std::string, double> rmsd_sum;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    setup.seed = seed;
    setup.train.seed = seed;
    const auto rows = bench(setup, gm_den(), ve(), gm_truth, jobs());
    std::map<std::pair<std::string, std::size_t>, double> best_heur;
    std::map<std::pair<std::string, std::size_t>, double> ld3_dist;
    for (const auto& r : rows) {
      rmsd_sum[r.method] += r.rmsd;
      const auto key = std::make_pair(r.solver, r.nfe);
      if (r.method == "ld3") {
        ld3_dist[key] = r.teacher_dist;
      } else {
        auto it = best_heur.find(key);
        if (it == best_heur.end() || r.teacher_dist < it->second) best_heur[key] = r.teacher_dist;
      }
    }
    for (const auto& [key, d] : ld3_dist) {
      ++cells;
      if (d <= best_heur.at(key)) ++wins;
    }
  }
  const double frac = static_cast<double>(wins) / static_cast<double>(cells);
  std::string lowest;
  double lowest_v = 0.0;
  std::ostringstream means;
  for (const auto& [m, s] : rmsd_sum) {
    if (lowest.empty() || s < lowest_v) {
      lowest = m;
      lowest_v = s;
    }
    means << " " << m << "=" << fmt(s / static_cast<double>(cells));
  }
  const bool pass = cells == 30 && frac >= 0.8 && lowest == "ld3";
  return {pass, std::to_string(wins) + "/" + std::to_string(cells) + " cells; mean rmsd" + means.str()};
}

Outcome radius_trend() {
  const std::vector<double> rs{0.0, 0.01, 0.1, 1.0, 5.0};
  const SolverSpec spec{SolverFamily::Dpmpp, 2, 4};
  std::vector<double> mean(rs.size(), 0.0);
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto data = generate_dataset(gm_den(), ve(), TeacherSpec{}, 100, seed, jobs());
    TrainConfig cfg;
    cfg.seed = seed;
    const auto rows = sweep_r(cfg, data, gm_den(), ve(), spec, rs, jobs());
    for (std::size_t i = 0; i < rs.size(); ++i) mean[i] += rows[i].best_val_loss / kSeeds;
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < rs.size(); ++i) os << (i ? ", " : "") << "r=" << fmt(rs[i]) << ": " << fmt(mean[i]);
  return {mean.back() <= mean.front(), "mean best loss " + os.str()};
}

Outcome transfer_trend() {
  const std::vector<SolverSpec> families{{SolverFamily::Dpmpp, 2, 4}, {SolverFamily::Euler, 1, 4}};
  const std::size_t k = families.size();
  std::vector<std::vector<double>> mean(k, std::vector<double>(k, 0.0));
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto data = generate_dataset(gm_den(), ve(), TeacherSpec{}, 100, seed, jobs());
    std::vector<TrainedGrid> grids;
    for (const auto& spec : families) {
      auto local = data;
      TrainConfig cfg;
      cfg.seed = seed;
      grids.push_back({spec, train(cfg, local, gm_den(), ve(), spec, std::nullopt, {}, jobs()).best});
    }
    const auto m = cross_eval(grids, families, data, gm_den(), ve(), jobs());
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) mean[i][j] += m[i][j] / kSeeds;
    }
  }
  bool pass = true;
  std::ostringstream os;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      if (i != j && !(mean[j][j] < mean[i][j])) pass = false;
    }
    os << (j ? "; " : "") << families[j].label() << " column:";
    for (std::size_t i = 0; i < k; ++i) os << " " << fmt(mean[i][j]);
  }
  return {pass, os.str()};
}

Outcome bound_trend() {
  const auto closed = bound_terms(0.19, 3072);
  bool pass = std::abs(closed.term1 - 0.19 * 0.19 / 2.0) <= 1e-15 &&
              std::abs(closed.term2 - 0.19 * std::sqrt(3073.0)) <= 1e-12;
  const auto teacher = SolverMap::teacher(TeacherSpec{}, ve());
  const auto student = SolverMap::heuristic({SolverFamily::Dpmpp, 2, 4}, Heuristic::LogSnr, ve());
  double t_small = 0.0;
  double t_large = 0.0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    for (double r : {0.1, 10.0}) {
      const auto rep = estimate_bound(gm_den(), ve(), teacher, student, r, 100, seed, jobs());
      const auto cf = bound_terms(r, 2);
      if (rep.term1 != cf.term1 || rep.term2 != cf.term2 || rep.d != 2) pass = false;
      (r < 1.0 ? t_small : t_large) += rep.term3 / kSeeds;
    }
  }
  pass = pass && t_small <= t_large;
  return {pass, "term1+term2(0.19, 3072) = " + fmt(closed.term1 + closed.term2) + ", mean term3 r=10: " +
                    fmt(t_large) + ", r=0.1: " + fmt(t_small)};
}

bool tau_monotone() {
  for (std::uint64_t k = 0; k < 1000; ++k) {
    Rng rng(99, k);
    const std::size_t n = 1 + k % 16;
    const auto t = tau(std::span<const double>(rng.normal_vector(n + 1, 1.0 + static_cast<double>(k % 4))),
                       ve().t_min, ve().T);
    if (t.front() != ve().T || t.back() != ve().t_min) return false;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      if (!(t[i] > t[i + 1])) return false;
    }
  }
  return true;
}

bool ball_constraint() {
  auto data = generate_dataset(gm_den(), ve(), TeacherSpec{}, 40, 3);
  TrainConfig cfg;
  cfg.r = 0.05;
  const SolverSpec spec{SolverFamily::Dpmpp, 2, 4};
  bool ok = true;
  std::size_t seen = 0;
  const auto report = train(cfg, data, gm_den(), ve(), spec, std::nullopt,
                            [&](const IterationRecord& rec, const Discretization&, const Dataset& d) {
                              ++seen;
                              const double rho = 0.05 * ve().sigma_max();
                              if (rec.max_ball_excess > 1e-12 * rho) ok = false;
                              for (const auto& p : d.pairs) {
                                double s = 0.0;
                                for (std::size_t j = 0; j < p.x_T.size(); ++j) {
                                  s += (p.x_prime[j] - p.x_T[j]) * (p.x_prime[j] - p.x_T[j]);
                                }
                                if (std::sqrt(s) > rho * (1.0 + 1e-12)) ok = false;
                              }
                            });
  return ok && seen == report.iterations.size() && seen > 0;
}

bool remat_matches() {
  const SolverSpec specs[] = {{SolverFamily::Euler, 1, 0}, {SolverFamily::Dpmpp, 1, 0},
                              {SolverFamily::Dpmpp, 2, 0}, {SolverFamily::Ipndm, 4, 0}};
  for (auto spec : specs) {
    for (std::size_t nfe : {1u, 4u, 10u}) {
      spec.nfe = nfe;
      Rng rng(nfe, spec.order);
      const auto times = tau(std::span<const double>(rng.normal_vector(nfe + 1, 0.7)), ve().t_min, ve().T);
      std::vector<double> xc(nfe + 1);
      for (std::size_t i = 0; i < xc.size(); ++i) xc[i] = 0.05 * times[i] * rng.normal();
      const auto times_c = tau_c(std::span<const double>(times), std::span<const double>(xc), ve().t_min, ve().T);
      const auto x = rng.normal_vector(2, ve().T);
      const auto loss = squared_l2_loss(rng.normal_vector(2));
      const auto a = checkpointed_solve_grad(gm_den(), ve(), spec, times, times_c, x, loss);
      const auto b = whole_tape_solve_grad(gm_den(), ve(), spec, times, times_c, x, loss);
      auto close = [](const std::vector<double>& u, const std::vector<double>& v) {
        for (std::size_t i = 0; i < u.size(); ++i) {
          if (std::abs(u[i] - v[i]) > 1e-12) return false;
        }
        return u.size() == v.size();
      };
      if (!close(a.d_times, b.d_times) || !close(a.d_times_c, b.d_times_c) || !close(a.d_x, b.d_x)) {
        return false;
      }
    }
  }
  return true;
}

#ifdef LD3_HAVE_CLI
bool reruns_identical() {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ld3_acceptance_reruns";
  fs::remove_all(dir);
  std::ostringstream log;
  auto cfg = RunConfig::parse(
      "seed = 11\neval.nfe_list = 4\neval.count = 50\ntrain.count = 40\n");
  bool ok = true;
  for (int j : {1, 2}) {
    const auto sub = dir / std::to_string(j);
    cli::gen_data(cfg, sub / "data.bin", j, log);
    ok = cli::train(cfg, std::nullopt, sub / "run", j, log) && ok;
    cli::bench(cfg, sub / "bench.csv", j, log);
  }
  for (const char* f : {"data.bin", "run/checkpoint.json", "run/metrics.csv", "bench.csv"}) {
    if (read_text_file(dir / "1" / f) != read_text_file(dir / "2" / f)) ok = false;
  }
  fs::remove_all(dir);
  return ok;
}
#else
bool reruns_identical() {
  std::ostringstream a;
  std::ostringstream b;
  write_dataset(a, generate_dataset(gm_den(), ve(), TeacherSpec{}, 40, 11, 1));
  write_dataset(b, generate_dataset(gm_den(), ve(), TeacherSpec{}, 40, 11, 2));
  return a.str() == b.str();
}
#endif

Outcome invariants() {
  const bool t = tau_monotone();
  const bool ball = ball_constraint();
  const bool remat = remat_matches();
  const bool rerun = reruns_identical();
  auto mark = [](bool b) { return b ? "ok" : "FAILED"; };
  return {t && ball && remat && rerun, std::string("tau ") + mark(t) + ", ball " + mark(ball) +
                                            ", remat " + mark(remat) + ", reruns " + mark(rerun)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"radius formula anchor", radius_anchor},
      {"soft-loss gradients vs finite differences", gradient_suite},
      {"first-order exactness on point mass", exactness_oracle},
      {"convergence orders", convergence_orders},
      {"ld3 beats heuristic grids", beats_heuristics},
      {"larger ball lowers trained loss", radius_trend},
      {"grids transfer worse across solvers", transfer_trend},
      {"bound terms and term3 trend", bound_trend},
      {"invariant suite", invariants},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", index, c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failed;
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
