#include "gnsspdr/io.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kGnssHeader =
    "epoch_s,sat_id,pseudorange_m,doppler_hz,wavelength_m,snr_dbhz,sat_x_m,"
    "sat_y_m,sat_z_m,sat_vx_mps,sat_vy_mps,sat_vz_mps,sat_clk_m,"
    "sat_clkdrift_mps";
constexpr std::string_view kImuHeader = "t_s,ax,ay,az,mx,my,mz";
constexpr std::string_view kTruthHeader = "epoch_s,x_m,y_m,z_m";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view field, std::size_t line,
                 std::string_view column) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw Error(ErrorKind::kParseError, line,
                "column " + std::string(column) + ": cannot parse '" +
                    std::string(field) + "'");
  }
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::kParseError, line,
                "column " + std::string(column) + ": non-finite value");
  }
  return v;
}

// Reads a CSV with a fixed header; calls `row(fields, line)` per data line.
template <typename F>
void read_csv(const fs::path& path, std::string_view header, F&& row) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  const auto columns = split(header, ',');
  while (std::getline(in, text)) {
    ++line_no;
    const std::string_view line = trim(text);
    if (line.empty()) continue;
    if (!have_header) {
      if (line != header) {
        throw Error(ErrorKind::kSchemaError, line_no,
                    path.filename().string() + ": expected header '" +
                        std::string(header) + "'");
      }
      have_header = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != columns.size()) {
      throw Error(ErrorKind::kParseError, line_no,
                  "expected " + std::to_string(columns.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    row(fields, columns, line_no);
  }
  if (!have_header) {
    throw Error(ErrorKind::kSchemaError, path.filename().string() + " is empty");
  }
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, std::string_view header) : path_(path), out_(path) {
    if (!out_) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
    out_ << header << '\n';
  }
  CsvWriter& operator<<(double v) { return field(format_number(v)); }
  CsvWriter& operator<<(std::string_view s) { return field(s); }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }
  void close() {
    out_.close();
    if (!out_) throw Error(ErrorKind::kIoError, "failed writing " + path_.string());
  }

 private:
  CsvWriter& field(std::string_view s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  fs::path path_;
  std::ofstream out_;
  bool first_ = true;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw Error(ErrorKind::kIoError, "failed writing " + path.string());
}

[[noreturn]] void config_error(std::size_t line, const std::string& msg) {
  if (line > 0) throw Error(ErrorKind::kConfigError, line, msg);
  throw Error(ErrorKind::kConfigError, msg);
}

// Typed access to one config section; keys left unread are rejected.
class SectionReader {
 public:
  SectionReader(const IniDocument& doc, const std::string& name)
      : base_(doc.base_dir()), name_(name) {
    const auto it = doc.sections().find(name);
    if (it != doc.sections().end()) section_ = &it->second;
  }

  bool present() const { return section_ != nullptr; }

  const IniDocument::Entry* raw(const std::string& key) {
    used_.insert(key);
    if (!section_) return nullptr;
    const auto it = section_->find(key);
    return it == section_->end() ? nullptr : &it->second;
  }

  void get(const std::string& key, double& out) {
    if (const auto* e = raw(key)) out = number(*e, key);
  }
  void get_deg(const std::string& key, double& out_rad) {
    if (const auto* e = raw(key)) out_rad = deg2rad(number(*e, key));
  }
  void get(const std::string& key, int& out) {
    if (const auto* e = raw(key)) out = static_cast<int>(integer(*e, key));
  }
  void get(const std::string& key, std::size_t& out) {
    if (const auto* e = raw(key)) {
      const long long v = integer(*e, key);
      if (v < 0) config_error(e->line, key + " must be >= 0");
      out = static_cast<std::size_t>(v);
    }
  }
  void get_u64(const std::string& key, std::uint64_t& out) {
    if (const auto* e = raw(key)) {
      const auto& s = e->value;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        config_error(e->line, key + ": expected an unsigned integer");
      }
    }
  }
  void get(const std::string& key, bool& out) {
    if (const auto* e = raw(key)) {
      std::string v = e->value;
      std::transform(v.begin(), v.end(), v.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (v == "true" || v == "yes" || v == "1" || v == "on") {
        out = true;
      } else if (v == "false" || v == "no" || v == "0" || v == "off") {
        out = false;
      } else {
        config_error(e->line, key + ": expected a boolean");
      }
    }
  }
  void get_path(const std::string& key, fs::path& out) {
    if (const auto* e = raw(key)) {
      fs::path p(e->value);
      out = p.is_absolute() || e->value.empty() ? p : base_ / p;
    }
  }

  std::vector<double> numbers(const IniDocument::Entry& e, char sep,
                              const std::string& key) const {
    std::vector<double> out;
    for (auto f : split(e.value, sep)) out.push_back(number_text(f, e.line, key));
    return out;
  }

  void finish() const {
    if (!section_) return;
    for (const auto& [key, entry] : *section_) {
      if (!used_.count(key)) {
        config_error(entry.line, "unknown key '" + key + "' in [" + name_ + "]");
      }
    }
  }

  double number(const IniDocument::Entry& e, const std::string& key) const {
    return number_text(e.value, e.line, key);
  }

 private:
  static double number_text(std::string_view s, std::size_t line,
                            const std::string& key) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() ||
        !std::isfinite(v)) {
      config_error(line, key + ": expected a number, got '" + std::string(s) + "'");
    }
    return v;
  }
  static long long integer(const IniDocument::Entry& e, const std::string& key) {
    long long v = 0;
    const auto& s = e.value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      config_error(e.line, key + ": expected an integer");
    }
    return v;
  }

  fs::path base_;
  std::string name_;
  const IniDocument::Section* section_ = nullptr;
  std::set<std::string> used_;
};

GeodeticPoint parse_origin(SectionReader& r, const IniDocument::Entry& e,
                           const std::string& key) {
  const auto v = r.numbers(e, ',', key);
  if (v.size() != 3) config_error(e.line, key + ": expected lat_deg, lon_deg, height_m");
  if (std::abs(v[0]) > 90.0 || std::abs(v[1]) > 180.0) {
    config_error(e.line, key + ": latitude/longitude out of range");
  }
  return {deg2rad(v[0]), deg2rad(v[1]), v[2]};
}

void parse_run(const IniDocument& doc, ConfigBundle& out) {
  RunConfig& rc = out.run;
  PipelineSettings& s = rc.settings;

  SectionReader input(doc, "input");
  out.has_run = input.present();
  input.get_path("gnss", rc.gnss_path);
  input.get_path("imu", rc.imu_path);
  input.get_path("truth", rc.truth_path);
  input.get("doppler_sign", rc.doppler_sign);
  if (rc.doppler_sign != 1.0 && rc.doppler_sign != -1.0) {
    config_error(0, "doppler_sign must be 1 or -1");
  }
  input.finish();

  SectionReader output(doc, "output");
  output.get_path("dir", rc.output_dir);
  output.finish();

  SectionReader run(doc, "run");
  if (const auto* e = run.raw("pipeline")) {
    try {
      rc.pipeline = parse_pipeline(e->value);
    } catch (const Error& err) {
      config_error(e->line, err.what());
    }
  }
  if (const auto* e = run.raw("origin")) {
    if (e->value != "auto") s.origin = parse_origin(run, *e, "origin");
  }
  run.finish();

  SectionReader mask(doc, "mask");
  double el_deg = rad2deg(s.mask.min_elevation);
  mask.get("min_elevation_deg", el_deg);
  mask.get("min_snr_dbhz", s.mask.min_snr);
  if (!(el_deg >= 0.0 && el_deg <= 90.0)) config_error(0, "min_elevation_deg out of range");
  s.mask.min_elevation = deg2rad(el_deg);
  mask.finish();

  SectionReader w(doc, "weights");
  auto& wm = s.weights.weight_model;
  w.get("sigma0", wm.sigma0);
  w.get("snr_ref", wm.snr_ref);
  w.get("snr_floor", wm.snr_floor);
  w.get("elevation_exponent", wm.elevation_exponent);
  w.get("doppler_weight_scale", wm.doppler_weight_scale);
  w.get("doppler_scale_on_covariance", wm.doppler_scale_on_covariance);
  w.get("sigma_pdr2", s.weights.sigma_pdr2);
  w.get("sigma_cv2", s.weights.sigma_cv2);
  w.get("sigma_smm2", s.weights.sigma_smm2);
  w.get("clock_bias_var", s.weights.clock_bias_var);
  w.get("clock_drift_var", s.weights.clock_drift_var);
  w.finish();
  s.weights.validate();

  SectionReader so(doc, "solver");
  so.get("max_iterations", s.solver.max_iterations);
  so.get("initial_lambda", s.solver.initial_lambda);
  so.get("lambda_up", s.solver.lambda_up);
  so.get("lambda_down", s.solver.lambda_down);
  so.get("cost_tolerance", s.solver.cost_tolerance);
  so.get("step_tolerance", s.solver.step_tolerance);
  so.get("window", s.solver.window);
  so.get("dense", s.solver.dense);
  so.finish();
  s.solver.validate();

  SectionReader p(doc, "pdr");
  p.get("alpha_acc", s.pdr.alpha_acc);
  p.get("alpha_mag", s.pdr.alpha_mag);
  p.get("alpha_gravity", s.pdr.alpha_gravity);
  p.get("k_w", s.pdr.k_w);
  p.get("dip_threshold", s.pdr.detector.dip_threshold);
  p.get("refractory", s.pdr.detector.refractory);
  p.get("max_half_window", s.pdr.detector.max_half_window);
  p.get("pca_smoothing", s.pdr.pca_smoothing);
  p.get("isotropy_ratio", s.pdr.isotropy_ratio);
  p.get("forward_window", s.pdr.forward_window);
  p.get("forward_ratio", s.pdr.forward_ratio);
  p.get("min_length", s.pdr.min_length);
  p.get("max_length", s.pdr.max_length);
  p.finish();
  s.pdr.validate();

  SectionReader ek(doc, "ekf");
  ek.get("update_passes", s.ekf.update_passes);
  ek.get("innovation_gating", s.ekf.innovation_gating);
  ek.get("gate_chi2", s.ekf.gate_chi2);
  ek.get("pdr_as_measurement", s.ekf.pdr_as_measurement);
  ek.finish();
  if (s.ekf.update_passes < 1 || !(s.ekf.gate_chi2 > 0.0)) {
    config_error(0, "ekf: update_passes >= 1 and gate_chi2 > 0 required");
  }
  s.ekf.weights = s.weights;

  if (out.has_run && rc.gnss_path.empty()) {
    config_error(0, "[input] needs a gnss path");
  }
}

void parse_scenario(const IniDocument& doc, ConfigBundle& out) {
  ScenarioConfig& sc = out.scenario;

  SectionReader s(doc, "scenario");
  s.get_u64("seed", sc.seed);
  s.get("duration", sc.duration);
  s.get("epoch_rate", sc.epoch_rate);
  s.get("imu_rate", sc.imu_rate);
  s.get("speed", sc.speed);
  s.get("clock_bias", sc.clock_bias);
  s.get("clock_drift", sc.clock_drift);
  if (const auto* e = s.raw("origin")) sc.origin = parse_origin(s, *e, "origin");
  if (const auto* e = s.raw("waypoints")) {
    sc.waypoints.clear();
    for (auto pair : split(e->value, ';')) {
      std::istringstream in{std::string(pair)};
      double east = 0.0, north = 0.0;
      std::string rest;
      if (!(in >> east >> north) || (in >> rest)) {
        config_error(e->line, "waypoints: expected 'east north; east north; ...'");
      }
      sc.waypoints.emplace_back(east, north);
    }
  }
  s.finish();

  SectionReader g(doc, "gait");
  g.get("step_length", sc.gait.step_length);
  g.get("forward_amplitude", sc.gait.forward_amplitude);
  g.get("forward_lag", sc.gait.forward_lag);
  g.get_deg("mount_yaw_deg", sc.gait.mount_yaw);
  g.get_deg("roll_deg", sc.gait.roll);
  g.get_deg("pitch_deg", sc.gait.pitch);
  g.get_deg("mag_declination_deg", sc.gait.mag_declination);
  g.get("imu_lead", sc.gait.imu_lead);
  g.get("k_w", sc.gait.k_w);
  g.get("alpha_acc", sc.gait.alpha_acc);
  g.finish();

  SectionReader n(doc, "noise");
  n.get("pseudorange_sigma", sc.noise.pseudorange_sigma);
  n.get("doppler_sigma", sc.noise.doppler_sigma);
  n.get("accel_sigma", sc.noise.accel_sigma);
  n.get("mag_sigma", sc.noise.mag_sigma);
  n.get("snr_sigma", sc.noise.snr_sigma);
  n.finish();

  SectionReader nl(doc, "nlos");
  nl.get("probability", sc.nlos.probability);
  nl.get("bias_low", sc.nlos.bias_low);
  nl.get("bias_high", sc.nlos.bias_high);
  nl.get("persistence", sc.nlos.persistence);
  nl.finish();

  const auto it = doc.sections().find("constellation");
  if (it != doc.sections().end()) {
    sc.constellation.clear();
    SectionReader c(doc, "constellation");
    for (const auto& [id, entry] : it->second) {
      const auto v = c.numbers(entry, ',', id);
      if (v.size() != 3 && v.size() != 4) {
        config_error(entry.line, id + ": expected az_deg, el_deg, plane_deg[, radius_m]");
      }
      SatelliteSpec spec;
      spec.id = id;
      spec.azimuth = deg2rad(v[0]);
      spec.elevation = deg2rad(v[1]);
      spec.plane_angle = deg2rad(v[2]);
      if (v.size() == 4) spec.radius = v[3];
      sc.constellation.push_back(spec);
    }
  }

  out.has_scenario = SectionReader(doc, "scenario").present() ||
                     SectionReader(doc, "gait").present() ||
                     SectionReader(doc, "noise").present() ||
                     SectionReader(doc, "nlos").present() ||
                     it != doc.sections().end();
  sc.validate();
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

GnssData read_gnss_csv(const fs::path& path, double doppler_sign) {
  std::map<double, EpochObservations> grouped;
  GnssData data;
  double last_epoch = -std::numeric_limits<double>::infinity();
  bool warned = false;
  read_csv(path, kGnssHeader,
           [&](const std::vector<std::string_view>& f,
               const std::vector<std::string_view>& col, std::size_t line) {
             auto num = [&](std::size_t i) { return to_double(f[i], line, col[i]); };
             SatObservation o;
             o.epoch = num(0);
             o.sat_id = std::string(f[1]);
             if (o.sat_id.empty()) {
               throw Error(ErrorKind::kParseError, line, "empty sat_id");
             }
             o.pseudorange = num(2);
             o.doppler = f[3].empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : doppler_sign * num(3);
             o.wavelength = num(4);
             o.snr = num(5);
             o.sat_pos = {num(6), num(7), num(8)};
             o.sat_vel = {num(9), num(10), num(11)};
             o.sat_clock_bias = num(12);
             o.sat_clock_drift = num(13);
             if (o.epoch < last_epoch && !warned) {
               data.warnings.push_back("line " + std::to_string(line) +
                                       ": epochs out of order; sorted");
               warned = true;
             }
             last_epoch = std::max(last_epoch, o.epoch);
             grouped[o.epoch].push_back(std::move(o));
           });
  for (auto& [t, obs] : grouped) {
    data.times.push_back(t);
    data.epochs.push_back(std::move(obs));
  }
  return data;
}

void write_gnss_csv(const fs::path& path,
                    const std::vector<EpochObservations>& epochs,
                    double doppler_sign) {
  CsvWriter w(path, kGnssHeader);
  for (const auto& epoch : epochs) {
    for (const auto& o : epoch) {
      w << o.epoch << o.sat_id << o.pseudorange;
      if (std::isfinite(o.doppler)) {
        w << doppler_sign * o.doppler;
      } else {
        w << std::string_view();
      }
      w << o.wavelength << o.snr << o.sat_pos.x() << o.sat_pos.y()
        << o.sat_pos.z() << o.sat_vel.x() << o.sat_vel.y() << o.sat_vel.z()
        << o.sat_clock_bias << o.sat_clock_drift;
      w.end_row();
    }
  }
  w.close();
}

std::vector<ImuSample> read_imu_csv(const fs::path& path) {
  std::vector<ImuSample> out;
  read_csv(path, kImuHeader,
           [&](const std::vector<std::string_view>& f,
               const std::vector<std::string_view>& col, std::size_t line) {
             auto num = [&](std::size_t i) { return to_double(f[i], line, col[i]); };
             ImuSample s;
             s.t = num(0);
             s.accel = {num(1), num(2), num(3)};
             s.mag = {num(4), num(5), num(6)};
             if (!out.empty() && !(s.t > out.back().t)) {
               throw Error(ErrorKind::kNonMonotoneTime, line,
                           "IMU timestamps must strictly increase");
             }
             out.push_back(s);
           });
  return out;
}

void write_imu_csv(const fs::path& path, const std::vector<ImuSample>& samples) {
  CsvWriter w(path, kImuHeader);
  for (const auto& s : samples) {
    w << s.t << s.accel.x() << s.accel.y() << s.accel.z() << s.mag.x()
      << s.mag.y() << s.mag.z();
    w.end_row();
  }
  w.close();
}

TruthData read_truth_csv(const fs::path& path) {
  TruthData out;
  read_csv(path, kTruthHeader,
           [&](const std::vector<std::string_view>& f,
               const std::vector<std::string_view>& col, std::size_t line) {
             auto num = [&](std::size_t i) { return to_double(f[i], line, col[i]); };
             const double t = num(0);
             if (!out.times.empty() && !(t > out.times.back())) {
               throw Error(ErrorKind::kNonMonotoneTime, line,
                           "truth epochs must strictly increase");
             }
             out.times.push_back(t);
             out.positions.emplace_back(num(1), num(2), num(3));
           });
  return out;
}

void write_truth_csv(const fs::path& path, const TruthData& truth) {
  if (truth.times.size() != truth.positions.size()) {
    throw Error(ErrorKind::kInvalidArgument, "truth times/positions mismatch");
  }
  CsvWriter w(path, kTruthHeader);
  for (std::size_t i = 0; i < truth.times.size(); ++i) {
    const auto& p = truth.positions[i];
    w << truth.times[i] << p.x() << p.y() << p.z();
    w.end_row();
  }
  w.close();
}

std::vector<ResidualRow> read_residuals_csv(const fs::path& path) {
  std::vector<ResidualRow> out;
  read_csv(path, "kind,epoch_s,label,value",
           [&](const std::vector<std::string_view>& f,
               const std::vector<std::string_view>& col, std::size_t line) {
             out.push_back({std::string(f[0]), to_double(f[1], line, col[1]),
                            std::string(f[2]), to_double(f[3], line, col[3])});
           });
  return out;
}

std::vector<std::pair<double, double>> read_errors_csv(const fs::path& path) {
  std::vector<std::pair<double, double>> out;
  read_csv(path, "epoch_s,horizontal_error_m",
           [&](const std::vector<std::string_view>& f,
               const std::vector<std::string_view>& col, std::size_t line) {
             out.emplace_back(to_double(f[0], line, col[0]),
                              to_double(f[1], line, col[1]));
           });
  return out;
}

IniDocument IniDocument::parse(std::string_view text) {
  IniDocument doc;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    // ';' only comments out whole lines: waypoint lists use it as a separator
    const std::size_t comment = line.find('#');
    if (comment != std::string_view::npos) line = line.substr(0, comment);
    line = trim(line);
    if (!line.empty() && line.front() == ';') continue;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        config_error(line_no, "malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      doc.sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) config_error(line_no, "expected key = value");
    if (section.empty()) config_error(line_no, "key outside of a [section]");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) config_error(line_no, "empty key");
    auto& sec = doc.sections_[section];
    if (sec.count(key)) config_error(line_no, "duplicate key '" + key + "'");
    sec[key] = {std::string(trim(line.substr(eq + 1))), line_no};
  }
  return doc;
}

IniDocument IniDocument::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfigError, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  IniDocument doc = parse(ss.str());
  doc.base_dir_ = path.parent_path();
  return doc;
}

ConfigBundle parse_config(const IniDocument& doc) {
  static const std::set<std::string> kKnown = {
      "input", "output", "run",   "mask",  "weights", "solver",        "pdr",
      "ekf",   "scenario", "gait", "noise", "nlos",    "constellation"};
  for (const auto& [name, section] : doc.sections()) {
    if (!kKnown.count(name)) {
      const std::size_t line = section.empty() ? 0 : section.begin()->second.line;
      config_error(line, "unknown section [" + name + "]");
    }
  }
  ConfigBundle out;
  parse_run(doc, out);
  parse_scenario(doc, out);
  return out;
}

ConfigBundle load_config(const fs::path& path) {
  return parse_config(IniDocument::load(path));
}

RunMetrics compute_metrics(const RunOutput& run) {
  RunMetrics m;
  if (!run.truth) return m;
  std::vector<EcefPoint> est;
  est.reserve(run.states.size());
  for (const auto& s : run.states) est.push_back(s.p);
  m.errors = horizontal_errors(est, run.times, run.truth->positions,
                               run.truth->times, run.origin);
  if (!m.errors.empty()) m.stats = summarize(m.errors);
  return m;
}

void write_results(const fs::path& dir, const RunOutput& run) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create " + dir.string());
  if (run.times.size() != run.states.size()) {
    throw Error(ErrorKind::kInvalidArgument, "times/states size mismatch");
  }
  const RunMetrics metrics = compute_metrics(run);

  CsvWriter traj(dir / "trajectory.csv",
                 "epoch_s,x_m,y_m,z_m,east_m,north_m,up_m,clock_bias_m,"
                 "clock_drift_mps,vx_mps,vy_mps,vz_mps");
  nlohmann::json coords = nlohmann::json::array();
  for (std::size_t k = 0; k < run.states.size(); ++k) {
    const auto& s = run.states[k];
    const EnuVector enu = ecef_to_enu(s.p, run.origin);
    traj << run.times[k] << s.p.x() << s.p.y() << s.p.z() << enu.x() << enu.y()
         << enu.z() << s.clock_bias << s.clock_drift << s.v.x() << s.v.y()
         << s.v.z();
    traj.end_row();
    const GeodeticPoint g = ecef_to_geodetic(s.p);
    coords.push_back({rad2deg(g.longitude), rad2deg(g.latitude)});
  }
  traj.close();

  if (run.truth) {
    CsvWriter err(dir / "errors.csv", "epoch_s,horizontal_error_m");
    for (std::size_t k = 0; k < metrics.errors.size(); ++k) {
      err << run.times[k] << metrics.errors[k];
      err.end_row();
    }
    err.close();
  }

  CsvWriter res(dir / "residuals.csv", "kind,epoch_s,label,value");
  nlohmann::json residual_stats = nlohmann::json::object();
  for (const auto& [kind, entries] : run.report.residuals) {
    double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
    for (const auto& e : entries) {
      res << to_string(kind) << run.times.at(e.epoch) << e.label << e.value;
      res.end_row();
      sum += e.value;
      sum_abs += std::abs(e.value);
      sum_sq += e.value * e.value;
    }
    const double n = static_cast<double>(entries.size());
    if (n > 0) {
      const double mean = sum / n;
      residual_stats[std::string(to_string(kind))] = {
          {"count", entries.size()},
          {"mean", mean},
          {"mean_abs", sum_abs / n},
          {"rms", std::sqrt(sum_sq / n)},
          {"std", std::sqrt(std::max(sum_sq / n - mean * mean, 0.0))}};
    }
  }
  res.close();

  nlohmann::json doc;
  doc["pipeline"] = run.pipeline;
  doc["epochs"] = run.states.size();
  doc["solver"] = {{"converged", run.report.converged},
                   {"iterations", run.report.iterations},
                   {"initial_cost", run.report.initial_cost},
                   {"final_cost", run.report.final_cost},
                   {"termination", run.report.termination}};
  if (metrics.stats) {
    doc["horizontal_error_m"] = {{"rmse", metrics.stats->rmse},
                                 {"mean", metrics.stats->mean},
                                 {"std", metrics.stats->std},
                                 {"max", metrics.stats->max}};
  }
  doc["residuals"] = residual_stats;
  write_text(dir / "metrics.json", doc.dump(2) + "\n");

  nlohmann::json geo = {
      {"type", "Feature"},
      {"properties", {{"pipeline", run.pipeline}}},
      {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}};
  write_text(dir / "trajectory.geojson", geo.dump() + "\n");
}

}  // namespace gnsspdr
