#include "gnsspdr/pipeline.h"

#include <algorithm>
#include <cctype>
#include <string>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

std::string_view to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kFgo: return "FGO";
    case Pipeline::kEkfPdr: return "EKF-PDR";
    case Pipeline::kFgoCv: return "FGO-CV";
    case Pipeline::kFgoCvSmm: return "FGO-CV-SMM";
    case Pipeline::kFgoPdr: return "FGO-PDR";
    case Pipeline::kFgoPdrSmm: return "FGO-PDR-SMM";
    case Pipeline::kFgoPdrCv: return "FGO-PDR-CV";
    case Pipeline::kFgoPdrCvSmm: return "FGO-PDR-CV-SMM";
  }
  return "?";
}

Pipeline parse_pipeline(std::string_view name) {
  const std::string key = upper(name);
  for (Pipeline p : kAllPipelines) {
    if (to_string(p) == key) return p;
  }
  throw Error(ErrorKind::kConfigError, "unknown pipeline '" + std::string(name) + "'");
}

EnabledFactors factors_of(Pipeline p) {
  switch (p) {
    case Pipeline::kFgo: return {false, false, false};
    case Pipeline::kEkfPdr: return {true, false, false};
    case Pipeline::kFgoCv: return {false, true, false};
    case Pipeline::kFgoCvSmm: return {false, true, true};
    case Pipeline::kFgoPdr: return {true, false, false};
    case Pipeline::kFgoPdrSmm: return {true, false, true};
    case Pipeline::kFgoPdrCv: return {true, true, false};
    case Pipeline::kFgoPdrCvSmm: return {true, true, true};
  }
  return {};
}

bool needs_pdr(Pipeline p) { return factors_of(p).pdr; }

PreparedRun prepare_run(std::span<const double> times,
                        std::span<const EpochObservations> raw,
                        std::span<const ImuSample> imu,
                        const PipelineSettings& settings) {
  if (times.size() != raw.size()) {
    throw Error(ErrorKind::kInvalidArgument, "times/epochs size mismatch");
  }
  PreparedRun run;
  run.times.assign(times.begin(), times.end());

  bool found = false;
  for (const auto& epoch : raw) {
    try {
      run.apriori = single_epoch_fix(epoch).p;
      found = true;
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientSatellites &&
          e.kind() != ErrorKind::kSingularGeometry &&
          e.kind() != ErrorKind::kDegenerateGeometry) {
        throw;
      }
    }
  }
  if (!found) throw Error(ErrorKind::kEmptyGraph, "no epoch yields a fix");
  run.origin = settings.origin ? *settings.origin : ecef_to_geodetic(run.apriori);

  run.epochs.reserve(raw.size());
  for (const auto& epoch : raw) {
    EpochObservations obs = epoch;
    assign_elevations(obs, run.apriori);
    EpochObservations kept = mask_observations(obs, settings.mask);
    run.rejected_by_mask += obs.size() - kept.size();
    run.epochs.push_back(std::move(kept));
  }

  if (!imu.empty()) {
    PdrResult pdr = run_pdr(imu, settings.pdr);
    run.steps = std::move(pdr.steps);
    run.pdr_diagnostics = pdr.diagnostics;
    run.displacements =
        accumulate_epoch_displacement(run.steps, run.times, run.origin);
  }
  return run;
}

VariantResult run_variant(const PreparedRun& run, Pipeline pipeline,
                          const PipelineSettings& settings) {
  if (needs_pdr(pipeline) && run.times.size() > 1 && run.displacements.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(to_string(pipeline)) + " needs IMU data");
  }
  VariantResult out;
  out.pipeline = pipeline;
  FactorGraph graph = build_graph(run.times, run.epochs, run.displacements,
                                  settings.weights, factors_of(pipeline));
  if (pipeline == Pipeline::kEkfPdr) {
    EkfConfig cfg = settings.ekf;
    cfg.weights = settings.weights;
    const EkfRun ekf = run_ekf(run.times, run.epochs, run.displacements, cfg);
    for (std::size_t k = 0; k < ekf.states.size(); ++k) {
      graph.states[k] = ekf.states[k].mean;
    }
    out.report.converged = true;
    out.report.termination = "filter";
    out.report.initial_cost = out.report.final_cost = graph_cost(graph);
    out.report.residuals = residual_report(graph);
  } else {
    out.report = optimize(graph, settings.solver);
  }
  out.states = std::move(graph.states);
  return out;
}

}  // namespace gnsspdr
