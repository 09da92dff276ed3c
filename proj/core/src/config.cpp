#include "ld3/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "ld3/error.hpp"
#include "ld3/io.hpp"

namespace ld3 {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  s = trim(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.emplace_back(trim(s.substr(start, comma == std::string_view::npos ? s.size() - start
                                                                          : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("invalid number '" + std::string(v) + "' for key " + key);
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("invalid integer '" + std::string(v) + "' for key " + key);
  }
  return out;
}

bool to_bool(const std::string& key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for key " + key);
}

std::vector<double> to_doubles(const std::string& key, std::string_view v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_real(v[i]);
  return out;
}

template <class T>
std::string join_uints(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<SolverSpec> to_solvers(const std::string& key, std::string_view v) {
  std::vector<SolverSpec> out;
  for (const auto& item : split_list(v)) {
    const auto colon = item.find(':');
    SolverSpec s;
    s.family = parse_solver_family(item.substr(0, colon));
    s.order = colon == std::string::npos ? (s.family == SolverFamily::Euler ? 1 : 2)
                                         : static_cast<int>(to_uint(key, item.substr(colon + 1)));
    s.nfe = 1;
    s.validate();
    out.push_back(s);
  }
  if (out.empty()) throw ConfigError("key " + key + " needs at least one solver");
  return out;
}

std::string join_solvers(const std::vector<SolverSpec>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += (i ? "," : "") + std::string(to_string(v[i].family)) + ":" + std::to_string(v[i].order);
  }
  return out;
}

std::string optional_real(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string("auto");
}

std::optional<double> to_optional(const std::string& key, std::string_view v) {
  if (trim(v) == "auto") return std::nullopt;
  return to_double(key, v);
}

std::string to_string(DsmWeight w) { return w == DsmWeight::Uniform ? "uniform" : "sigma2"; }

DsmWeight to_weight(const std::string& key, std::string_view v) {
  v = trim(v);
  if (v == "uniform") return DsmWeight::Uniform;
  if (v == "sigma2") return DsmWeight::Sigma2;
  throw ConfigError("invalid dsm weight '" + std::string(v) + "' for key " + key);
}

struct KeyHandler {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

using Table = std::map<std::string, KeyHandler>;

const Table& table() {
  static const Table t = [] {
    Table m;
    m["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_uint(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    m["output.dir"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                         c.output_dir = std::string(trim(v));
                       },
                       [](const RunConfig& c) { return c.output_dir; }};
    // schedule.family is applied before the other keys (see parse)
    m["schedule.family"] = {[](RunConfig&, const std::string&, const std::string&) {},
                            [](const RunConfig& c) { return std::string(to_string(c.schedule.family)); }};
    m["schedule.T"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.schedule.T = to_double(k, v);
                       },
                       [](const RunConfig& c) { return format_real(c.schedule.T); }};
    m["schedule.t_min"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                             c.schedule.t_min = to_double(k, v);
                           },
                           [](const RunConfig& c) { return format_real(c.schedule.t_min); }};
    m["schedule.beta_0"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              c.schedule.beta_0 = to_double(k, v);
                            },
                            [](const RunConfig& c) { return format_real(c.schedule.beta_0); }};
    m["schedule.beta_1"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              c.schedule.beta_1 = to_double(k, v);
                            },
                            [](const RunConfig& c) { return format_real(c.schedule.beta_1); }};

    m["data.kind"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                        const auto s = std::string(trim(v));
                        if (s != "gm" && s != "point") throw ConfigError("invalid value '" + s + "' for key " + k);
                        c.data_kind = s;
                      },
                      [](const RunConfig& c) { return c.data_kind; }};
    m["data.d"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.data_d = to_uint(k, v); },
                   [](const RunConfig& c) { return std::to_string(c.data_d); }};
    m["data.weights"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.data_weights = to_doubles(k, v);
                         },
                         [](const RunConfig& c) { return join_reals(c.data_weights); }};
    m["data.means"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.data_means = to_doubles(k, v);
                       },
                       [](const RunConfig& c) { return join_reals(c.data_means); }};
    m["data.vars"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                        c.data_vars = to_doubles(k, v);
                      },
                      [](const RunConfig& c) { return join_reals(c.data_vars); }};

    m["denoiser.kind"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            const auto s = std::string(trim(v));
                            if (s != "analytic" && s != "mlp") throw ConfigError("invalid value '" + s + "' for key " + k);
                            c.denoiser_kind = s;
                          },
                          [](const RunConfig& c) { return c.denoiser_kind; }};
    m["denoiser.checkpoint"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                                  c.denoiser_checkpoint = std::string(trim(v));
                                },
                                [](const RunConfig& c) { return c.denoiser_checkpoint; }};
    m["mlp.width"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.mlp.width = to_uint(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.mlp.width); }};
    m["mlp.layers"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.mlp.hidden_layers = to_uint(k, v);
                       },
                       [](const RunConfig& c) { return std::to_string(c.mlp.hidden_layers); }};
    m["mlp.steps"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.mlp.steps = to_uint(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.mlp.steps); }};
    m["mlp.batch"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.mlp.batch = to_uint(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.mlp.batch); }};
    m["mlp.lr"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.mlp.lr = to_double(k, v); },
                   [](const RunConfig& c) { return format_real(c.mlp.lr); }};
    m["mlp.weight"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.mlp.weight = to_weight(k, v);
                       },
                       [](const RunConfig& c) { return to_string(c.mlp.weight); }};

    m["solver.family"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                            c.solver.family = parse_solver_family(trim(v));
                          },
                          [](const RunConfig& c) { return std::string(to_string(c.solver.family)); }};
    m["solver.order"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.solver.order = static_cast<int>(to_uint(k, v));
                         },
                         [](const RunConfig& c) { return std::to_string(c.solver.order); }};
    m["solver.nfe"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.solver.nfe = to_uint(k, v); },
                       [](const RunConfig& c) { return std::to_string(c.solver.nfe); }};
    m["teacher.family"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                             c.teacher.solver.family = parse_solver_family(trim(v));
                           },
                           [](const RunConfig& c) { return std::string(to_string(c.teacher.solver.family)); }};
    m["teacher.order"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.teacher.solver.order = static_cast<int>(to_uint(k, v));
                          },
                          [](const RunConfig& c) { return std::to_string(c.teacher.solver.order); }};
    m["teacher.nfe"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                          c.teacher.solver.nfe = to_uint(k, v);
                        },
                        [](const RunConfig& c) { return std::to_string(c.teacher.solver.nfe); }};
    m["teacher.grid"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                           c.teacher.grid = parse_heuristic(trim(v));
                         },
                         [](const RunConfig& c) { return std::string(to_string(c.teacher.grid)); }};

    m["train.count"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train_count = to_uint(k, v); },
                        [](const RunConfig& c) { return std::to_string(c.train_count); }};
    m["train.gamma"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.gamma = to_double(k, v); },
                        [](const RunConfig& c) { return format_real(c.train.gamma); }};
    m["train.r"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.r = to_optional(k, v); },
                    [](const RunConfig& c) { return optional_real(c.train.r); }};
    m["train.epochs_phase1"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                  c.train.epochs_phase1 = to_uint(k, v);
                                },
                                [](const RunConfig& c) { return std::to_string(c.train.epochs_phase1); }};
    m["train.epochs_phase2"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                  c.train.epochs_phase2 = to_uint(k, v);
                                },
                                [](const RunConfig& c) { return std::to_string(c.train.epochs_phase2); }};
    m["train.batch"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch = to_uint(k, v); },
                        [](const RunConfig& c) { return std::to_string(c.train.batch); }};
    m["train.lr_xi"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr_xi = to_double(k, v); },
                        [](const RunConfig& c) { return format_real(c.train.lr_xi); }};
    m["train.lr_xic"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.train.lr_xic = to_optional(k, v);
                         },
                         [](const RunConfig& c) { return optional_real(c.train.lr_xic); }};
    m["train.lr_xprime"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              c.train.lr_xprime = to_optional(k, v);
                            },
                            [](const RunConfig& c) { return optional_real(c.train.lr_xprime); }};
    m["train.clip"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.clip_norm = to_double(k, v); },
                       [](const RunConfig& c) { return format_real(c.train.clip_norm); }};
    m["train.decay"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                          c.train.decay_factor = to_double(k, v);
                        },
                        [](const RunConfig& c) { return format_real(c.train.decay_factor); }};
    m["train.patience"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                             c.train.patience = to_uint(k, v);
                           },
                           [](const RunConfig& c) { return std::to_string(c.train.patience); }};
    m["train.lr_xi_min"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              c.train.lr_xi_min = to_double(k, v);
                            },
                            [](const RunConfig& c) { return format_real(c.train.lr_xi_min); }};
    m["train.lr_xic_min"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                               c.train.lr_xic_min = to_double(k, v);
                             },
                             [](const RunConfig& c) { return format_real(c.train.lr_xic_min); }};
    m["train.val_refresh_steps"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                      c.train.val_refresh_steps = to_uint(k, v);
                                    },
                                    [](const RunConfig& c) { return std::to_string(c.train.val_refresh_steps); }};
    m["train.init"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                         c.train.init_candidates.clear();
                         for (const auto& item : split_list(v)) c.train.init_candidates.push_back(parse_heuristic(item));
                       },
                       [](const RunConfig& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.train.init_candidates.size(); ++i) {
                           out += (i ? "," : "") + std::string(to_string(c.train.init_candidates[i]));
                         }
                         return out;
                       }};
    m["train.record_wall_time"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                     c.record_wall_time = to_bool(k, v);
                                   },
                                   [](const RunConfig& c) { return std::string(c.record_wall_time ? "true" : "false"); }};

    m["eval.nfe_list"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.eval_nfe_list.clear();
                            for (const auto& item : split_list(v)) c.eval_nfe_list.push_back(to_uint(k, item));
                          },
                          [](const RunConfig& c) { return join_uints(c.eval_nfe_list); }};
    m["eval.solvers"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.eval_solvers = to_solvers(k, v);
                         },
                         [](const RunConfig& c) { return join_solvers(c.eval_solvers); }};
    m["eval.methods"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.eval_methods = split_list(v);
                           for (const auto& mth : c.eval_methods) {
                             if (mth != "ld3") {
                               try {
                                 parse_heuristic(mth);
                               } catch (const ConfigError&) {
                                 throw ConfigError("invalid method '" + mth + "' for key " + k);
                               }
                             }
                           }
                         },
                         [](const RunConfig& c) {
                           std::string out;
                           for (std::size_t i = 0; i < c.eval_methods.size(); ++i) out += (i ? "," : "") + c.eval_methods[i];
                           return out;
                         }};
    m["eval.count"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.eval_count = to_uint(k, v); },
                       [](const RunConfig& c) { return std::to_string(c.eval_count); }};
    m["eval.reference_nfe"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.eval_reference_nfe = to_uint(k, v);
                               },
                               [](const RunConfig& c) { return std::to_string(c.eval_reference_nfe); }};
    m["eval.r_values"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.eval_r_values = to_doubles(k, v);
                          },
                          [](const RunConfig& c) { return join_reals(c.eval_r_values); }};
    m["eval.bound_r"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.eval_bound_r = to_double(k, v); },
                         [](const RunConfig& c) { return format_real(c.eval_bound_r); }};
    m["eval.bound_samples"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.eval_bound_samples = to_uint(k, v);
                               },
                               [](const RunConfig& c) { return std::to_string(c.eval_bound_samples); }};
    m["eval.families"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.eval_families = to_solvers(k, v);
                          },
                          [](const RunConfig& c) { return join_solvers(c.eval_families); }};
    return m;
  }();
  return t;
}

void apply_family_defaults(NoiseSchedule& s, ScheduleFamily family) {
  s = family == ScheduleFamily::VeEdm ? NoiseSchedule::ve_edm() : NoiseSchedule::vp_linear();
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    ++line_no;
    const auto line = trim(raw);
    if (!line.empty() && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      }
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

RunConfig::RunConfig() {
  const auto gm = default_mixture();
  data_d = gm.dim();
  for (const auto& c : gm.components()) {
    data_weights.push_back(c.weight);
    data_means.insert(data_means.end(), c.mean.begin(), c.mean.end());
    data_vars.push_back(c.variance);
  }
  eval_solvers = {SolverSpec{SolverFamily::Dpmpp, 2, 1}, SolverSpec{SolverFamily::Ipndm, 4, 1}};
  eval_families = {SolverSpec{SolverFamily::Dpmpp, 2, 1}, SolverSpec{SolverFamily::Euler, 1, 1}};
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, handler] : table()) k.push_back(name);
    return k;
  }();
  return keys;
}

RunConfig RunConfig::parse(std::string_view text) {
  const auto kv = parse_key_values(text);
  const auto& t = table();
  for (const auto& [key, value] : kv) {
    if (!t.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig cfg;
  if (auto it = kv.find("schedule.family"); it != kv.end()) {
    apply_family_defaults(cfg.schedule, parse_schedule_family(trim(it->second)));
  }
  for (const auto& [key, value] : kv) t.at(key).set(cfg, key, value);
  cfg.schedule.validate();
  cfg.solver.validate();
  cfg.teacher.solver.validate();
  cfg.train.validate();
  if (cfg.teacher.solver.nfe < cfg.solver.nfe) {
    throw ConfigError("teacher.nfe must be at least solver.nfe");
  }
  if (cfg.train_count < 2) throw ConfigError("train.count must be at least 2");
  if (cfg.data_d == 0) throw ConfigError("data.d must be positive");
  for (auto n : cfg.eval_nfe_list) {
    if (n == 0) throw ConfigError("eval.nfe_list entries must be positive");
  }
  return cfg;
}

std::string RunConfig::snapshot() const {
  std::ostringstream os;
  for (const auto& [key, handler] : table()) os << key << " = " << handler.get(*this) << '\n';
  return os.str();
}

GaussianMixture RunConfig::mixture() const {
  const std::size_t k = data_weights.size();
  if (k == 0 || data_means.size() != k * data_d || data_vars.size() != k) {
    throw ConfigError("data.weights, data.means and data.vars describe inconsistent mixtures");
  }
  std::vector<MixtureComponent> comps;
  for (std::size_t i = 0; i < k; ++i) {
    comps.push_back({data_weights[i],
                     {data_means.begin() + static_cast<std::ptrdiff_t>(i * data_d),
                      data_means.begin() + static_cast<std::ptrdiff_t>((i + 1) * data_d)},
                     data_vars[i]});
  }
  try {
    return GaussianMixture(std::move(comps));
  } catch (const InputError& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
}

std::unique_ptr<Denoiser> RunConfig::make_denoiser() const {
  if (denoiser_kind == "mlp") {
    if (denoiser_checkpoint.empty()) throw ConfigError("denoiser.checkpoint is required for mlp");
    auto model = mlp_from_json(read_text_file(denoiser_checkpoint), schedule);
    if (model.dim() != data_d) throw ConfigError("mlp checkpoint dimension differs from data.d");
    return std::make_unique<MlpDenoiser>(std::move(model));
  }
  if (data_kind == "point") {
    if (data_means.size() != data_d) throw ConfigError("point data needs exactly data.d means");
    return std::make_unique<PointDenoiser>(data_means, schedule);
  }
  return std::make_unique<GmDenoiser>(mixture(), schedule);
}

BenchSetup RunConfig::bench_setup() const {
  BenchSetup b;
  b.solvers = eval_solvers;
  b.nfe_list = eval_nfe_list;
  b.heuristics.clear();
  b.include_ld3 = false;
  for (const auto& m : eval_methods) {
    if (m == "ld3") {
      b.include_ld3 = true;
    } else {
      b.heuristics.push_back(parse_heuristic(m));
    }
  }
  b.teacher = teacher;
  b.train = train;
  b.train.seed = seed;
  b.train_count = train_count;
  b.eval_count = eval_count;
  b.reference_nfe = eval_reference_nfe;
  b.seed = seed;
  return b;
}

}  // namespace ld3
