// CSV ingestion/export, the plain-text run and scenario configuration, and
// result files.
//
// CSV headers (exact):
//   gnss:  epoch_s,sat_id,pseudorange_m,doppler_hz,wavelength_m,snr_dbhz,
//          sat_x_m,sat_y_m,sat_z_m,sat_vx_mps,sat_vy_mps,sat_vz_mps,
//          sat_clk_m,sat_clkdrift_mps
//   imu:   t_s,ax,ay,az,mx,my,mz
//   truth: epoch_s,x_m,y_m,z_m
// Numbers are written with 12 significant digits.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gnsspdr/factors.h"
#include "gnsspdr/gnss_obs.h"
#include "gnsspdr/metrics.h"
#include "gnsspdr/pdr.h"
#include "gnsspdr/pipeline.h"
#include "gnsspdr/scenario.h"
#include "gnsspdr/solver.h"

namespace gnsspdr {

struct GnssData {
  std::vector<double> times;
  std::vector<EpochObservations> epochs;
  std::vector<std::string> warnings;
};

/// Groups rows by epoch_s; out-of-order epochs are sorted and a warning is
/// recorded. The Doppler column is multiplied by `doppler_sign`; an empty
/// Doppler field means "no Doppler" (stored as NaN). Any other non-finite or
/// malformed field is a ParseError carrying the line number; a header
/// mismatch is a SchemaError; a missing file is an IoError.
GnssData read_gnss_csv(const std::filesystem::path& path,
                       double doppler_sign = 1.0);
void write_gnss_csv(const std::filesystem::path& path,
                    const std::vector<EpochObservations>& epochs,
                    double doppler_sign = 1.0);

/// Throws NonMonotoneTime unless timestamps strictly increase.
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);
void write_imu_csv(const std::filesystem::path& path,
                   const std::vector<ImuSample>& samples);

struct TruthData {
  std::vector<double> times;
  std::vector<EcefPoint> positions;
};

TruthData read_truth_csv(const std::filesystem::path& path);
void write_truth_csv(const std::filesystem::path& path, const TruthData& truth);

/// `[section]` headers, `key = value` lines, `#` comments (anywhere) and
/// `;` comments (whole lines only).
/// Duplicate keys or malformed lines are ConfigErrors.
class IniDocument {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  using Section = std::map<std::string, Entry>;

  static IniDocument parse(std::string_view text);
  static IniDocument load(const std::filesystem::path& path);

  const std::map<std::string, Section>& sections() const { return sections_; }
  /// Directory relative paths resolve against.
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::map<std::string, Section> sections_;
  std::filesystem::path base_dir_;
};

struct RunConfig {
  std::filesystem::path gnss_path;
  std::filesystem::path imu_path;    ///< empty: no IMU
  std::filesystem::path truth_path;  ///< empty: no truth
  double doppler_sign = 1.0;
  std::filesystem::path output_dir = "out";
  Pipeline pipeline = Pipeline::kFgoPdrCvSmm;
  PipelineSettings settings;
};

struct ConfigBundle {
  RunConfig run;
  ScenarioConfig scenario;
  bool has_run = false;       ///< [input] present
  bool has_scenario = false;  ///< any scenario section present
};

/// Interprets every known section; unknown sections or keys and invalid
/// values are ConfigErrors (with the line number when known).
ConfigBundle parse_config(const IniDocument& doc);
ConfigBundle load_config(const std::filesystem::path& path);

/// Everything needed to write one solved run.
struct RunOutput {
  std::string pipeline;
  std::vector<double> times;
  std::vector<EpochState> states;
  GeodeticPoint origin;
  SolveReport report;
  std::optional<TruthData> truth;
};

/// Per-epoch errors (empty without truth) and the metrics document.
struct RunMetrics {
  std::vector<double> errors;
  std::optional<ErrorStats> stats;
};

RunMetrics compute_metrics(const RunOutput& run);

/// Writes trajectory.csv, residuals.csv, metrics.json, trajectory.geojson,
/// and errors.csv when truth is present. Throws IoError.
void write_results(const std::filesystem::path& dir, const RunOutput& run);

/// Rows of a residuals.csv written by write_results.
struct ResidualRow {
  std::string kind;
  double epoch = 0.0;
  std::string label;
  double value = 0.0;
};
std::vector<ResidualRow> read_residuals_csv(const std::filesystem::path& path);

/// (epoch_s, horizontal_error_m) rows of an errors.csv.
std::vector<std::pair<double, double>> read_errors_csv(
    const std::filesystem::path& path);

/// 12-significant-digit formatting used by every writer.
std::string format_number(double v);

}  // namespace gnsspdr
