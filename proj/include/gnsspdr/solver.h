// Batch factor graph over all epochs, the single-epoch least-squares
// initializer, and a Levenberg-Marquardt minimizer.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnsspdr/factors.h"
#include "gnsspdr/gnss_obs.h"
#include "gnsspdr/pdr.h"

namespace gnsspdr {

struct FactorGraph {
  std::vector<EpochState> states;
  std::vector<Factor> factors;
  std::vector<double> timestamps;  ///< [s], one per state

  /// Throws InvalidArgument on size mismatch or out-of-range factor indices,
  /// EmptyGraph when there are no states.
  void validate() const;
};

/// Motion factors to add on top of pseudorange + Doppler.
struct EnabledFactors {
  bool pdr = false;
  bool cv = false;
  bool smm = false;
};

struct SolverConfig {
  int max_iterations = 100;
  double initial_lambda = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double cost_tolerance = 1e-8;   ///< relative cost decrease
  double step_tolerance = 1e-10;  ///< relative to the state norm
  /// Epochs per batch; 0 means the whole trajectory at once.
  std::size_t window = 0;
  /// Force the dense normal-equation path.
  bool dense = false;

  void validate() const;
};

struct ResidualEntry {
  std::size_t epoch = 0;  ///< first connected epoch
  std::string label;      ///< satellite id, or axis / component name
  double value = 0.0;     ///< unwhitened
};

using ResidualReport = std::map<FactorKind, std::vector<ResidualEntry>>;

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double initial_cost = 0.0;  ///< whitened sum of squares
  double final_cost = 0.0;
  std::string termination;
  ResidualReport residuals;
};

/// Iterated least squares on the pseudoranges (from the geocenter until the
/// step is below 1e-4 m), then the linear range-rate system for velocity and
/// drift at the fixed position. Velocity and drift stay zero with fewer than
/// four usable Doppler values. With `weights` and finite elevations the
/// pseudorange solve is weighted like the graph.
/// Throws InsufficientSatellites (< 4 distinct satellites) or
/// SingularGeometry (normal matrix condition number > 1e12).
EpochState single_epoch_fix(const EpochObservations& obs,
                            const std::optional<WeightModel>& weights = {});

/// `epochs[k]` are the masked observations at `times[k]`. When PDR factors
/// are enabled `displacements` must hold one entry per interval; otherwise it
/// may be empty. Observations with a NaN Doppler get no Doppler factor.
/// Throws EmptyGraph when no epoch can be initialized.
FactorGraph build_graph(std::span<const double> times,
                        std::span<const EpochObservations> epochs,
                        std::span<const EpochDisplacement> displacements,
                        const FactorWeights& weights,
                        const EnabledFactors& enabled);

/// Sum of whitened squared residuals.
double graph_cost(const FactorGraph& graph);

/// Levenberg-Marquardt with Marquardt damping. Updates `graph.states` in
/// place. Throws NumericalFailure when the damped system cannot be solved at
/// lambda >= 1e8 or the cost becomes non-finite.
SolveReport optimize(FactorGraph& graph, const SolverConfig& config = {});

/// Unwhitened residual per factor grouped by kind. Three-axis factors yield
/// one entry per axis labelled "x", "y", "z".
ResidualReport residual_report(const FactorGraph& graph);

}  // namespace gnsspdr
