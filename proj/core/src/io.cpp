#include "ld3/io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "ld3/error.hpp"

namespace ld3 {

using nlohmann::json;

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  os.write(b, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_bytes(std::istream& is, int n) {
  unsigned char b[8] = {};
  if (!is.read(reinterpret_cast<char*>(b), n)) throw IoError("dataset stream truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::vector<double> get_vector(std::istream& is, std::size_t d) {
  std::vector<double> v(d);
  for (auto& x : v) x = std::bit_cast<double>(get_bytes(is, 8));
  return v;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_dataset(std::ostream& os, const Dataset& data) {
  os.write(kDatasetMagic, 4);
  put_u32(os, kDatasetVersion);
  put_u32(os, static_cast<std::uint32_t>(data.d));
  put_u32(os, static_cast<std::uint32_t>(data.pairs.size()));
  put_u64(os, data.schedule_hash);
  put_u64(os, data.seed);
  for (const auto& p : data.pairs) {
    for (double v : p.x_T) put_f64(os, v);
    for (double v : p.x_prime) put_f64(os, v);
    for (double v : p.y) put_f64(os, v);
  }
  if (!os) throw IoError("failed writing dataset");
}

Dataset read_dataset(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kDatasetMagic)) {
    throw IoError("not an LD3D dataset");
  }
  const auto version = static_cast<std::uint32_t>(get_bytes(is, 4));
  if (version != kDatasetVersion) {
    throw IoError("unsupported dataset version " + std::to_string(version));
  }
  Dataset data;
  data.d = static_cast<std::size_t>(get_bytes(is, 4));
  const auto count = static_cast<std::size_t>(get_bytes(is, 4));
  data.schedule_hash = get_bytes(is, 8);
  data.seed = get_bytes(is, 8);
  if (data.d == 0) throw IoError("dataset dimension is zero");
  data.pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    TrainPair p;
    p.x_T = get_vector(is, data.d);
    p.x_prime = get_vector(is, data.d);
    p.y = get_vector(is, data.d);
    data.pairs.push_back(std::move(p));
  }
  split_dataset(data);
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(os, data);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_dataset(is);
}

std::string checkpoint_to_json(const GridCheckpoint& ckpt) {
  json j;
  j["N"] = ckpt.disc.steps();
  j["T"] = ckpt.disc.T;
  j["t_min"] = ckpt.disc.t_min;
  j["xi"] = ckpt.disc.xi;
  j["xi_c"] = ckpt.disc.xi_c;
  j["times"] = ckpt.disc.times();
  j["times_c"] = ckpt.disc.times_c();
  j["solver"] = {{"family", std::string(to_string(ckpt.solver.family))},
                 {"order", ckpt.solver.order},
                 {"nfe", ckpt.solver.nfe}};
  j["val_loss"] = ckpt.val_loss;
  return j.dump(2) + "\n";
}

GridCheckpoint checkpoint_from_json(const std::string& text) {
  GridCheckpoint ckpt;
  std::vector<double> times;
  try {
    const auto j = json::parse(text);
    ckpt.disc.T = j.at("T").get<double>();
    ckpt.disc.t_min = j.at("t_min").get<double>();
    ckpt.disc.xi = j.at("xi").get<std::vector<double>>();
    ckpt.disc.xi_c = j.at("xi_c").get<std::vector<double>>();
    times = j.at("times").get<std::vector<double>>();
    const auto& s = j.at("solver");
    ckpt.solver.family = parse_solver_family(s.at("family").get<std::string>());
    ckpt.solver.order = s.at("order").get<int>();
    ckpt.solver.nfe = s.at("nfe").get<std::size_t>();
    ckpt.val_loss = j.value("val_loss", 0.0);
    if (j.at("N").get<std::size_t>() + 1 != ckpt.disc.xi.size()) {
      throw IoError("checkpoint N does not match xi");
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
  if (ckpt.disc.xi.size() != ckpt.disc.xi_c.size() || times.size() != ckpt.disc.xi.size()) {
    throw IoError("checkpoint vectors differ in length");
  }
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i] > times[i + 1])) throw GridError("checkpoint times are not strictly decreasing");
  }
  const auto derived = ckpt.disc.times();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(derived[i] - times[i]) > 1e-9 * ckpt.disc.T) {
      throw GridError("checkpoint times disagree with xi");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const GridCheckpoint& ckpt) {
  write_text_file(path, checkpoint_to_json(ckpt));
}

GridCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

std::string mlp_to_json(const MlpDenoiser& model) {
  json j;
  j["kind"] = "mlp";
  j["d"] = model.dim();
  j["layers"] = json::array();
  for (const auto& l : model.layers()) {
    j["layers"].push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weight}, {"bias", l.bias}});
  }
  return j.dump() + "\n";
}

MlpDenoiser mlp_from_json(const std::string& text, const NoiseSchedule& sched) {
  try {
    const auto j = json::parse(text);
    if (j.at("kind").get<std::string>() != "mlp") throw IoError("checkpoint is not an mlp");
    std::vector<MlpLayer> layers;
    for (const auto& l : j.at("layers")) {
      MlpLayer layer;
      layer.in = l.at("in").get<std::size_t>();
      layer.out = l.at("out").get<std::size_t>();
      layer.weight = l.at("weights").get<std::vector<double>>();
      layer.bias = l.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(layer));
    }
    return MlpDenoiser(sched, j.at("d").get<std::size_t>(), std::move(layers));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed mlp checkpoint: ") + e.what());
  }
}

void write_metrics_csv(std::ostream& os, const TrainReport& report, bool record_wall_time) {
  os << kMetricsCsvHeader << '\n';
  for (const auto& r : report.iterations) {
    os << r.iter << ',' << r.epoch << ',' << r.phase << ',' << format_real(r.train_loss) << ",,"
       << format_real(r.lr_xi) << ',' << format_real(r.lr_xic) << ",0\n";
  }
  std::size_t done = 0;
  for (const auto& e : report.epochs) {
    for (const auto& r : report.iterations) {
      if (r.epoch <= e.epoch) done = std::max(done, r.iter + 1);
    }
    os << done << ',' << e.epoch << ',' << e.phase << ",," << format_real(e.val_loss) << ','
       << format_real(e.lr_xi) << ',' << format_real(e.lr_xic) << ','
       << (record_wall_time ? format_real(e.wall_s) : std::string("0")) << '\n';
  }
}

std::string bound_to_json(const BoundReport& report) {
  json j;
  j["r"] = report.r;
  j["d"] = report.d;
  j["term1"] = report.term1;
  j["term2"] = report.term2;
  j["term3_estimate"] = report.term3;
  j["samples"] = report.samples;
  return j.dump(2) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace ld3
