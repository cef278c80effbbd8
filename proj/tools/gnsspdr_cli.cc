// gnsspdr: simulate data, run one estimator, compare all eight, evaluate
// standalone PDR, or summarize a finished run.
//
// Exit codes: 0 ok, 1 usage, 2 configuration, 3 numerical/processing,
// 4 input/output.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gnsspdr/errors.h"
#include "gnsspdr/io.h"
#include "gnsspdr/metrics.h"
#include "gnsspdr/pipeline.h"
#include "gnsspdr/scenario.h"

namespace fs = std::filesystem;
using namespace gnsspdr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config;
  std::string out;
  std::string pipeline;
  std::optional<std::uint64_t> seed;
  std::optional<double> nlos_prob;
  std::optional<std::size_t> window;
  bool verbose = false;
};

bool g_verbose = false;

void log(const std::string& msg) {
  if (g_verbose) std::cerr << "[gnsspdr] " << msg << '\n';
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfigError:
      return kExitConfig;
    case ErrorKind::kIoError:
    case ErrorKind::kParseError:
    case ErrorKind::kSchemaError:
    case ErrorKind::kNonMonotoneTime:
      return kExitIo;
    default:
      return kExitNumerical;
  }
}

void report_error(const Error& e) {
  std::cerr << "error: " << e.what() << '\n';
}

// Config plus command-line overrides, validated before anything is written.
ConfigBundle load(const Options& opt) {
  if (opt.config.empty()) throw Error(ErrorKind::kConfigError, "--config is required");
  ConfigBundle cfg = load_config(opt.config);
  if (opt.seed) cfg.scenario.seed = *opt.seed;
  if (opt.nlos_prob) cfg.scenario.nlos.probability = *opt.nlos_prob;
  cfg.scenario.validate();
  if (!opt.pipeline.empty()) cfg.run.pipeline = parse_pipeline(opt.pipeline);
  if (opt.window) cfg.run.settings.solver.window = *opt.window;
  if (!opt.out.empty()) cfg.run.output_dir = opt.out;
  return cfg;
}

struct Inputs {
  std::vector<double> times;
  std::vector<EpochObservations> epochs;
  std::vector<ImuSample> imu;
  std::optional<TruthData> truth;
};

// Reads the configured files, or simulates in memory when the config only
// describes a scenario.
Inputs load_inputs(ConfigBundle& cfg, bool need_imu) {
  Inputs in;
  if (cfg.has_run) {
    if (need_imu && cfg.run.imu_path.empty()) {
      throw Error(ErrorKind::kConfigError, "this pipeline needs [input] imu");
    }
    log("reading " + cfg.run.gnss_path.string());
    GnssData g = read_gnss_csv(cfg.run.gnss_path, cfg.run.doppler_sign);
    for (const auto& w : g.warnings) std::cerr << "warning: " << w << '\n';
    in.times = std::move(g.times);
    in.epochs = std::move(g.epochs);
    if (!cfg.run.imu_path.empty()) {
      log("reading " + cfg.run.imu_path.string());
      in.imu = read_imu_csv(cfg.run.imu_path);
    }
    if (!cfg.run.truth_path.empty()) {
      log("reading " + cfg.run.truth_path.string());
      in.truth = read_truth_csv(cfg.run.truth_path);
    }
    return in;
  }
  if (!cfg.has_scenario) {
    throw Error(ErrorKind::kConfigError,
                "config has neither an [input] section nor a scenario");
  }
  log("simulating seed " + std::to_string(cfg.scenario.seed));
  ScenarioBundle b = generate(cfg.scenario);
  in.times = b.times;
  in.epochs = std::move(b.epochs);
  in.imu = std::move(b.imu);
  TruthData t;
  t.times = b.times;
  for (const auto& s : b.truth) t.positions.push_back(s.p);
  in.truth = std::move(t);
  if (!cfg.run.settings.origin) cfg.run.settings.origin = b.origin;
  return in;
}

void print_stats_row(const std::string& name, const ErrorStats& s) {
  std::printf("%-16s %10.3f %10.3f %10.3f %10.3f\n", name.c_str(), s.rmse, s.mean,
              s.std, s.max);
}

int cmd_simulate(const Options& opt) {
  ConfigBundle cfg = load(opt);
  if (!cfg.has_scenario) {
    throw Error(ErrorKind::kConfigError, "config has no scenario sections");
  }
  const ScenarioBundle b = generate(cfg.scenario);
  const fs::path dir = cfg.run.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create " + dir.string());
  write_gnss_csv(dir / "gnss.csv", b.epochs);
  write_imu_csv(dir / "imu.csv", b.imu);
  TruthData t;
  t.times = b.times;
  for (const auto& s : b.truth) t.positions.push_back(s.p);
  write_truth_csv(dir / "truth.csv", t);
  log("wrote " + std::to_string(b.times.size()) + " epochs to " + dir.string());
  return kExitOk;
}

int cmd_solve(const Options& opt) {
  ConfigBundle cfg = load(opt);
  const Pipeline p = cfg.run.pipeline;
  Inputs in = load_inputs(cfg, needs_pdr(p));
  const PreparedRun run = prepare_run(in.times, in.epochs, in.imu, cfg.run.settings);
  log("running " + std::string(to_string(p)));
  VariantResult r = run_variant(run, p, cfg.run.settings);
  RunOutput out{std::string(to_string(p)), run.times, r.states, run.origin,
                r.report, in.truth};
  write_results(cfg.run.output_dir, out);
  const RunMetrics m = compute_metrics(out);
  std::printf("pipeline %s: %s after %d iterations, cost %.6g -> %.6g\n",
              out.pipeline.c_str(), r.report.converged ? "converged" : "not converged",
              r.report.iterations, r.report.initial_cost, r.report.final_cost);
  if (m.stats) {
    std::printf("%-16s %10s %10s %10s %10s\n", "method", "rmse", "mean", "std", "max");
    print_stats_row(out.pipeline, *m.stats);
  }
  if (!r.report.converged) {
    std::cerr << "warning: solver stopped at the iteration limit\n";
  }
  return kExitOk;
}

int cmd_compare(const Options& opt) {
  ConfigBundle cfg = load(opt);
  Inputs in = load_inputs(cfg, true);
  if (!in.truth) {
    throw Error(ErrorKind::kConfigError, "compare needs ground truth ([input] truth)");
  }
  const PreparedRun run = prepare_run(in.times, in.epochs, in.imu, cfg.run.settings);
  const fs::path dir = cfg.run.output_dir;

  std::vector<std::pair<Pipeline, ErrorStats>> rows;
  for (Pipeline p : kAllPipelines) {
    try {
      log("running " + std::string(to_string(p)));
      VariantResult r = run_variant(run, p, cfg.run.settings);
      RunOutput out{std::string(to_string(p)), run.times, r.states, run.origin,
                    r.report, in.truth};
      write_results(dir / out.pipeline, out);
      rows.emplace_back(p, *compute_metrics(out).stats);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kIoError) throw;
      std::cerr << to_string(p) << " failed: ";
      report_error(e);
    }
  }

  std::printf("%-16s %10s %10s %10s %10s\n", "method", "rmse", "mean", "std", "max");
  for (const auto& [p, s] : rows) print_stats_row(std::string(to_string(p)), s);

  const auto base = std::find_if(rows.begin(), rows.end(),
                                 [](const auto& r) { return r.first == Pipeline::kFgo; });
  std::FILE* stats_csv = std::fopen((dir / "compare_stats.csv").c_str(), "w");
  std::FILE* imp_csv = std::fopen((dir / "compare_improvement.csv").c_str(), "w");
  if (!stats_csv || !imp_csv) {
    if (stats_csv) std::fclose(stats_csv);
    if (imp_csv) std::fclose(imp_csv);
    throw Error(ErrorKind::kIoError, "cannot write comparison tables");
  }
  std::fprintf(stats_csv, "method,rmse_m,mean_m,std_m,max_m\n");
  std::fprintf(imp_csv, "method,rmse_pct,mean_pct,std_pct,max_pct\n");
  for (const auto& [p, s] : rows) {
    std::fprintf(stats_csv, "%s,%s,%s,%s,%s\n", std::string(to_string(p)).c_str(),
                 format_number(s.rmse).c_str(), format_number(s.mean).c_str(),
                 format_number(s.std).c_str(), format_number(s.max).c_str());
  }
  if (base != rows.end()) {
    std::printf("\nimprovement over FGO [%%]\n");
    std::printf("%-16s %10s %10s %10s %10s\n", "method", "rmse", "mean", "std", "max");
    for (const auto& [p, s] : rows) {
      const std::string name(to_string(p));
      if (p == Pipeline::kFgo) {
        std::printf("%-16s %10s %10s %10s %10s\n", name.c_str(), "/", "/", "/", "/");
        std::fprintf(imp_csv, "%s,/,/,/,/\n", name.c_str());
        continue;
      }
      const ErrorStats imp = improvement(base->second, s);
      print_stats_row(name, imp);
      std::fprintf(imp_csv, "%s,%s,%s,%s,%s\n", name.c_str(),
                   format_number(imp.rmse).c_str(), format_number(imp.mean).c_str(),
                   format_number(imp.std).c_str(), format_number(imp.max).c_str());
    }
  }
  std::fclose(stats_csv);
  std::fclose(imp_csv);
  return rows.empty() ? kExitNumerical : kExitOk;
}

int cmd_pdr_only(const Options& opt) {
  ConfigBundle cfg = load(opt);
  Inputs in = load_inputs(cfg, true);
  if (in.imu.empty()) throw Error(ErrorKind::kConfigError, "pdr-only needs IMU data");
  const PreparedRun run = prepare_run(in.times, in.epochs, in.imu, cfg.run.settings);
  const EcefPoint start = in.truth && !in.truth->positions.empty()
                              ? in.truth->positions.front()
                              : run.apriori;
  const auto track = pdr_standalone_track(run.displacements, start);

  const fs::path dir = cfg.run.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create " + dir.string());

  std::vector<double> errors;
  if (in.truth) {
    errors = horizontal_errors(track, run.times, in.truth->positions,
                               in.truth->times, run.origin);
  }
  std::FILE* f = std::fopen((dir / "pdr_track.csv").c_str(), "w");
  if (!f) throw Error(ErrorKind::kIoError, "cannot write pdr_track.csv");
  std::fprintf(f, "epoch_s,x_m,y_m,z_m,east_m,north_m,up_m%s\n",
               errors.empty() ? "" : ",horizontal_error_m");
  for (std::size_t k = 0; k < track.size(); ++k) {
    const EnuVector e = ecef_to_enu(track[k], run.origin);
    std::fprintf(f, "%s,%s,%s,%s,%s,%s,%s", format_number(run.times[k]).c_str(),
                 format_number(track[k].x()).c_str(), format_number(track[k].y()).c_str(),
                 format_number(track[k].z()).c_str(), format_number(e.x()).c_str(),
                 format_number(e.y()).c_str(), format_number(e.z()).c_str());
    if (!errors.empty()) std::fprintf(f, ",%s", format_number(errors[k]).c_str());
    std::fprintf(f, "\n");
  }
  std::fclose(f);

  std::printf("steps %zu, epochs %zu\n", run.steps.size(), track.size());
  if (!errors.empty()) {
    std::printf("%-16s %10s %10s %10s %10s\n", "method", "rmse", "mean", "std", "max");
    print_stats_row("PDR", summarize(errors));
    const std::size_t q = errors.size() / 4;
    if (q > 0) {
      const double first = *std::max_element(errors.begin(), errors.begin() + q);
      const double last = *std::max_element(errors.end() - q, errors.end());
      std::printf("max error first quarter %.3f m, last quarter %.3f m\n", first, last);
    }
  }
  return kExitOk;
}

int cmd_report(const Options& opt) {
  fs::path dir = opt.out;
  if (dir.empty()) dir = load(opt).run.output_dir;
  const auto rows = read_residuals_csv(dir / "residuals.csv");
  std::map<std::string, std::vector<double>> by_kind;
  for (const auto& r : rows) by_kind[r.kind].push_back(r.value);

  std::FILE* f = std::fopen((dir / "histograms.csv").c_str(), "w");
  if (!f) throw Error(ErrorKind::kIoError, "cannot write histograms.csv");
  std::fprintf(f, "kind,bin_center,count\n");
  std::printf("%-12s %8s %12s %12s %12s\n", "factor", "count", "mean", "std", "mean_abs");
  for (const auto& [kind, values] : by_kind) {
    double sum = 0.0, sum_abs = 0.0;
    for (double v : values) {
      sum += v;
      sum_abs += std::abs(v);
    }
    const double n = static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - sum / n) * (v - sum / n);
    std::printf("%-12s %8zu %12.4f %12.4f %12.4f\n", kind.c_str(), values.size(),
                sum / n, std::sqrt(var / n), sum_abs / n);
    const double width = kind == "doppler" ? 0.1 : 1.0;
    const Histogram h = histogram(values, width);
    for (std::size_t j = 0; j < h.counts.size(); ++j) {
      if (h.counts[j] == 0) continue;
      std::fprintf(f, "%s,%s,%zu\n", kind.c_str(), format_number(h.bin_center(j)).c_str(),
                   h.counts[j]);
    }
  }
  std::fclose(f);

  if (fs::exists(dir / "errors.csv")) {
    std::vector<double> errors;
    for (const auto& [t, e] : read_errors_csv(dir / "errors.csv")) errors.push_back(e);
    if (!errors.empty()) {
      std::printf("\n%-16s %10s %10s %10s %10s\n", "horizontal", "rmse", "mean", "std",
                  "max");
      print_stats_row(dir.filename().string(), summarize(errors));
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS pseudorange/Doppler + PDR factor graph toolkit"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd, bool pipeline_flags) {
    cmd->add_option("--config", opt.config, "Configuration file (INI-style)");
    cmd->add_option("--out", opt.out, "Output directory (default: [output] dir, else ./out)");
    cmd->add_option("--seed", opt.seed, "Override [scenario] seed (default 1)");
    cmd->add_option("--nlos-prob", opt.nlos_prob,
                    "Override [nlos] probability (default 0.2)")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--verbose", opt.verbose, "Progress messages on stderr");
    if (pipeline_flags) {
      cmd->add_option("--pipeline", opt.pipeline,
                      "FGO, EKF-PDR, FGO-CV, FGO-CV-SMM, FGO-PDR, FGO-PDR-SMM, "
                      "FGO-PDR-CV, FGO-PDR-CV-SMM (default FGO-PDR-CV-SMM)");
      cmd->add_option("--window", opt.window,
                      "Solver window in epochs (default 0 = whole trajectory)");
    }
  };

  auto* simulate = app.add_subcommand("simulate", "Write gnss.csv, imu.csv, truth.csv");
  add_common(simulate, false);
  auto* solve = app.add_subcommand("solve", "Run one pipeline and write results");
  add_common(solve, true);
  auto* compare = app.add_subcommand("compare", "Run all eight pipelines against truth");
  add_common(compare, true);
  auto* pdr_only = app.add_subcommand("pdr-only", "Standalone PDR track and drift");
  add_common(pdr_only, false);
  auto* report = app.add_subcommand("report", "Residual statistics and histograms of a run");
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  g_verbose = opt.verbose;

  try {
    if (*simulate) return cmd_simulate(opt);
    if (*solve) return cmd_solve(opt);
    if (*compare) return cmd_compare(opt);
    if (*pdr_only) return cmd_pdr_only(opt);
    if (*report) return cmd_report(opt);
  } catch (const Error& e) {
    report_error(e);
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
