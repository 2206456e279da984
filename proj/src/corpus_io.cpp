#include "uwbresp/corpus_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace uwbresp {

static_assert(std::endian::native == std::endian::little, "float32 files are written in host order");

namespace fs = std::filesystem;

Json to_json(const RadarConfig& c) {
  return Json{{"carrier_frequency", c.carrier_frequency}, {"frame_rate", c.frame_rate},
              {"fast_time_bins", c.fast_time_bins},       {"bin_spacing", c.bin_spacing},
              {"pulse_width_bins", c.pulse_width_bins},   {"noise_std", c.noise_std}};
}

RadarConfig radar_config_from_json(const Json& j) {
  RadarConfig c;
  c.carrier_frequency = j.value("carrier_frequency", c.carrier_frequency);
  c.frame_rate = j.value("frame_rate", c.frame_rate);
  c.fast_time_bins = j.value("fast_time_bins", c.fast_time_bins);
  c.bin_spacing = j.value("bin_spacing", c.bin_spacing);
  c.pulse_width_bins = j.value("pulse_width_bins", c.pulse_width_bins);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.validate();
  return c;
}

Json to_json(const Scene& s) {
  const auto& r = s.respiration;
  Json spans = Json::array();
  for (const auto& [a, b] : r.apnea_spans) spans.push_back({a, b});
  Json clutter = Json::array();
  for (const auto& c : s.static_clutter) clutter.push_back({{"distance", c.distance}, {"amplitude", c.amplitude}});
  return Json{{"subject_distance", s.subject_distance},
              {"reflectivity", s.reflectivity},
              {"respiration",
               {{"kind", to_string(r.kind)},
                {"rate", r.rate},
                {"depth", r.depth},
                {"inhale_fraction", r.inhale_fraction},
                {"phase", r.phase},
                {"apnea_spans", spans},
                {"cycle_depths", r.cycle_depths}}},
              {"motion_kind", to_string(s.motion_kind)},
              {"motion_intensity", s.motion_intensity},
              {"bbr_base", {s.bbr_base.real(), s.bbr_base.imag()}},
              {"static_clutter", clutter},
              {"duration", s.duration},
              {"rng_seed", s.rng_seed}};
}

Scene scene_from_json(const Json& j) {
  Scene s;
  s.subject_distance = j.value("subject_distance", s.subject_distance);
  s.reflectivity = j.value("reflectivity", s.reflectivity);
  if (j.contains("respiration")) {
    const Json& r = j.at("respiration");
    auto& p = s.respiration;
    p.kind = breath_kind_from_string(r.value("kind", std::string("sinusoid")));
    p.rate = r.value("rate", p.rate);
    p.depth = r.value("depth", p.depth);
    p.inhale_fraction = r.value("inhale_fraction", p.inhale_fraction);
    p.phase = r.value("phase", p.phase);
    if (r.contains("apnea_spans"))
      for (const auto& span : r.at("apnea_spans")) p.apnea_spans.emplace_back(span.at(0), span.at(1));
    p.cycle_depths = r.value("cycle_depths", std::vector<double>{});
  }
  s.motion_kind = motion_kind_from_string(j.value("motion_kind", std::string("static")));
  s.motion_intensity = j.value("motion_intensity", s.motion_intensity);
  if (j.contains("bbr_base")) s.bbr_base = {j.at("bbr_base").at(0), j.at("bbr_base").at(1)};
  if (j.contains("static_clutter"))
    for (const auto& c : j.at("static_clutter")) s.static_clutter.push_back({c.at("distance"), c.at("amplitude")});
  s.duration = j.value("duration", s.duration);
  s.rng_seed = j.value("rng_seed", s.rng_seed);
  s.validate();
  return s;
}

void write_f32(const fs::path& path, std::span<const float> data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::vector<float> read_f32(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const auto bytes = fs::file_size(path);
  if (bytes % sizeof(float) != 0) throw std::runtime_error(path.string() + " is not a float32 array");
  std::vector<float> out(bytes / sizeof(float));
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  return out;
}

void write_matrix_f32(const fs::path& path, const Eigen::MatrixXd& m) {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m.cast<float>();
  write_f32(path, std::span<const float>(rm.data(), static_cast<std::size_t>(rm.size())));
}

Eigen::MatrixXd read_matrix_f32(const fs::path& path, Index rows, Index cols) {
  const auto raw = read_f32(path);
  if (static_cast<Index>(raw.size()) != rows * cols)
    throw std::runtime_error(path.string() + ": expected " + std::to_string(rows * cols) + " floats");
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(raw.data(), rows, cols).cast<double>();
}

void write_vector_f32(const fs::path& path, const Eigen::VectorXd& v) {
  Eigen::VectorXf f = v.cast<float>();
  write_f32(path, std::span<const float>(f.data(), static_cast<std::size_t>(f.size())));
}

Eigen::VectorXd read_vector_f32(const fs::path& path, Index size) {
  const auto raw = read_f32(path);
  if (static_cast<Index>(raw.size()) != size)
    throw std::runtime_error(path.string() + ": expected " + std::to_string(size) + " floats");
  return Eigen::Map<const Eigen::VectorXf>(raw.data(), size).cast<double>();
}

namespace {

std::string record_name(std::size_t k) {
  std::ostringstream os;
  os << "rec_" << std::setw(6) << std::setfill('0') << k;
  return os.str();
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_corpus(const fs::path& dir, const Dataset& ds, const std::vector<double>& rotations) {
  fs::create_directories(dir);
  Json names = Json::array();
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    const auto& rec = ds.records[k];
    const std::string name = record_name(k);
    Json header{{"bins", rec.matrix.bins()},
                {"frames", rec.matrix.frames()},
                {"frame_rate", rec.matrix.frame_rate},
                {"bin_spacing", rec.matrix.bin_spacing},
                {"scene_index", rec.scene_index},
                {"window_index", rec.window_index},
                {"seed", rec.scene.rng_seed},
                {"rotation", k < rotations.size() ? rotations[k] : 0.0},
                {"scene", to_json(rec.scene)}};
    write_text(dir / (name + ".json"), header.dump(2) + "\n");
    write_matrix_f32(dir / (name + ".i.f32"), rec.matrix.i);
    write_matrix_f32(dir / (name + ".q.f32"), rec.matrix.q);
    write_vector_f32(dir / (name + ".truth.f32"), rec.truth);
    names.push_back(name);
  }
  Json manifest{{"format", "uwbresp-corpus-1"},
                {"radar", to_json(ds.config)},
                {"window_s", ds.window_s},
                {"records", names}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_corpus(const fs::path& dir) {
  const Json manifest = Json::parse(read_text(dir / "manifest.json"));
  Dataset ds;
  ds.config = radar_config_from_json(manifest.at("radar"));
  ds.window_s = manifest.at("window_s");
  for (const auto& name_json : manifest.at("records")) {
    const std::string name = name_json;
    const Json h = Json::parse(read_text(dir / (name + ".json")));
    DatasetRecord rec;
    const Index bins = h.at("bins"), frames = h.at("frames");
    rec.matrix = ComplexMatrix(bins, frames, h.at("frame_rate"), h.at("bin_spacing"));
    rec.matrix.i = read_matrix_f32(dir / (name + ".i.f32"), bins, frames);
    rec.matrix.q = read_matrix_f32(dir / (name + ".q.f32"), bins, frames);
    rec.truth = read_vector_f32(dir / (name + ".truth.f32"), frames);
    rec.scene_index = h.at("scene_index");
    rec.window_index = h.at("window_index");
    rec.scene = scene_from_json(h.at("scene"));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Dataset rotate_corpus(const Dataset& ds, int count, std::vector<double>* rotations) {
  if (count < 1) throw std::invalid_argument("rotation count must be at least 1");
  Dataset out;
  out.config = ds.config;
  out.window_s = ds.window_s;
  for (const auto& rec : ds.records)
    for (int k = 0; k < count; ++k) {
      const double theta = 2.0 * kPi * k / count;
      const double c = std::cos(theta), s = std::sin(theta);
      DatasetRecord r = rec;
      r.matrix.i = c * rec.matrix.i - s * rec.matrix.q;
      r.matrix.q = s * rec.matrix.i + c * rec.matrix.q;
      out.records.push_back(std::move(r));
      if (rotations) rotations->push_back(theta);
    }
  return out;
}

}  // namespace uwbresp
