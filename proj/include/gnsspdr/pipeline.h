// The eight compared estimators and the shared preprocessing they consume:
// a-priori fix, elevation/SNR masking, and PDR displacements.
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gnsspdr/ekf.h"
#include "gnsspdr/factors.h"
#include "gnsspdr/gnss_obs.h"
#include "gnsspdr/pdr.h"
#include "gnsspdr/solver.h"

namespace gnsspdr {

enum class Pipeline {
  kFgo,
  kEkfPdr,
  kFgoCv,
  kFgoCvSmm,
  kFgoPdr,
  kFgoPdrSmm,
  kFgoPdrCv,
  kFgoPdrCvSmm,
};

inline constexpr std::array<Pipeline, 8> kAllPipelines{
    Pipeline::kFgo,       Pipeline::kEkfPdr,    Pipeline::kFgoCv,
    Pipeline::kFgoCvSmm,  Pipeline::kFgoPdr,    Pipeline::kFgoPdrSmm,
    Pipeline::kFgoPdrCv,  Pipeline::kFgoPdrCvSmm};

/// "FGO", "EKF-PDR", "FGO-CV", ... as in the method tables.
std::string_view to_string(Pipeline p);
/// Case-insensitive. Throws ConfigError for unknown names.
Pipeline parse_pipeline(std::string_view name);
EnabledFactors factors_of(Pipeline p);
bool needs_pdr(Pipeline p);

struct PipelineSettings {
  FactorWeights weights;
  SolverConfig solver;
  MaskThresholds mask;
  PdrConfig pdr;
  EkfConfig ekf;  ///< its `weights` are overwritten by `weights`
  /// ENU origin for PDR and evaluation; unset means the first fix.
  std::optional<GeodeticPoint> origin;
};

/// Inputs shared by every variant of one run. Masking happens here, once.
struct PreparedRun {
  std::vector<double> times;
  std::vector<EpochObservations> epochs;  ///< masked, elevations filled
  std::vector<EpochDisplacement> displacements;  ///< empty without IMU
  std::vector<StepEvent> steps;
  PdrDiagnostics pdr_diagnostics;
  GeodeticPoint origin;
  EcefPoint apriori = EcefPoint::Zero();
  std::size_t rejected_by_mask = 0;
};

/// Throws EmptyGraph when no epoch yields an a-priori fix.
PreparedRun prepare_run(std::span<const double> times,
                        std::span<const EpochObservations> raw,
                        std::span<const ImuSample> imu,
                        const PipelineSettings& settings);

struct VariantResult {
  Pipeline pipeline = Pipeline::kFgo;
  std::vector<EpochState> states;
  SolveReport report;
};

/// Runs one estimator. PDR pipelines throw InvalidArgument when the run has
/// no displacements.
VariantResult run_variant(const PreparedRun& run, Pipeline pipeline,
                          const PipelineSettings& settings);

}  // namespace gnsspdr
