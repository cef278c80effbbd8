#include "gnsspdr/solver.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {

using Block = Eigen::Matrix<double, kStateDim, kStateDim>;

constexpr double kOmegaOverC =
    EarthConstants::kOmegaEarth / EarthConstants::kSpeedOfLight;
constexpr double kMaxCondition = 1e12;
constexpr double kDiagonalFloor = 1e-6;
constexpr double kMinLambda = 1e-15;
constexpr double kMaxLambda = 1e16;
constexpr double kFailLambda = 1e8;
constexpr double kAnchorVariance = 1e-10;
constexpr double kRestartLambda = 1e-4;

double condition_number(const Eigen::Matrix4d& n) {
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(n);
  const auto& s = svd.singularValues();
  if (!(s(3) > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / s(3);
}

// Whitened Jacobian and residual of one factor.
struct Whitened {
  Eigen::MatrixXd j;
  Eigen::VectorXd r;
};

Whitened whiten(const Factor& f, std::span<const EpochState> states) {
  const Linearization lin = f.linearize(states);
  return {f.whitener() * lin.jacobian, f.whitener() * lin.residual};
}

// Normal equations stored either densely or as a block tridiagonal chain.
class NormalEquations {
 public:
  NormalEquations(std::size_t epochs, bool dense)
      : n_(epochs), dense_(dense), g_(Eigen::VectorXd::Zero(8 * epochs)) {
    if (dense_) {
      h_ = Eigen::MatrixXd::Zero(8 * n_, 8 * n_);
    } else {
      diag_.assign(n_, Block::Zero());
      upper_.assign(n_ > 0 ? n_ - 1 : 0, Block::Zero());
    }
  }

  void add(const Factor& f, const Whitened& w) {
    const Eigen::MatrixXd jtj = w.j.transpose() * w.j;
    const Eigen::VectorXd jtr = w.j.transpose() * w.r;
    for (std::size_t a = 0; a < f.num_epochs(); ++a) {
      const std::size_t ea = f.epoch(a);
      g_.segment<8>(8 * ea) += jtr.segment<8>(8 * a);
      for (std::size_t b = 0; b < f.num_epochs(); ++b) {
        const std::size_t eb = f.epoch(b);
        const Block blk = jtj.block<8, 8>(8 * a, 8 * b);
        if (dense_) {
          h_.block<8, 8>(8 * ea, 8 * eb) += blk;
        } else if (ea == eb) {
          diag_[ea] += blk;
        } else if (eb == ea + 1) {
          upper_[ea] += blk;
        }
      }
    }
  }

  const Eigen::VectorXd& gradient() const { return g_; }

  /// Solves (H + lambda * D) delta = -g. Returns false when not positive
  /// definite.
  bool solve(double lambda, Eigen::VectorXd& delta) const {
    return dense_ ? solve_dense(lambda, delta) : solve_chain(lambda, delta);
  }

 private:
  static Block damp(const Block& d, double lambda) {
    Block out = d;
    for (int i = 0; i < kStateDim; ++i) {
      out(i, i) += lambda * std::max(d(i, i), kDiagonalFloor);
    }
    return out;
  }

  bool solve_dense(double lambda, Eigen::VectorXd& delta) const {
    Eigen::MatrixXd a = h_;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      a(i, i) += lambda * std::max(h_(i, i), kDiagonalFloor);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    delta = llt.solve(-g_);
    return delta.allFinite();
  }

  // Block LDL^T forward elimination / back substitution along the chain.
  bool solve_chain(double lambda, Eigen::VectorXd& delta) const {
    std::vector<Eigen::LLT<Block>> pivots;
    pivots.reserve(n_);
    std::vector<Eigen::Matrix<double, 8, 1>> y(n_);
    std::vector<Block> c(n_);  // S_i^{-1} U_i
    for (std::size_t i = 0; i < n_; ++i) {
      Block s = damp(diag_[i], lambda);
      Eigen::Matrix<double, 8, 1> rhs = -g_.segment<8>(8 * i);
      if (i > 0) {
        s -= upper_[i - 1].transpose() * c[i - 1];
        rhs -= upper_[i - 1].transpose() * y[i - 1];
      }
      pivots.emplace_back(s);
      if (pivots.back().info() != Eigen::Success) return false;
      y[i] = pivots.back().solve(rhs);
      if (i + 1 < n_) c[i] = pivots.back().solve(upper_[i]);
    }
    delta.resize(8 * static_cast<Eigen::Index>(n_));
    for (std::size_t k = n_; k-- > 0;) {
      Eigen::Matrix<double, 8, 1> x = y[k];
      if (k + 1 < n_) x -= c[k] * delta.segment<8>(8 * (k + 1));
      delta.segment<8>(8 * k) = x;
    }
    return delta.allFinite();
  }

  std::size_t n_;
  bool dense_;
  Eigen::VectorXd g_;
  Eigen::MatrixXd h_;
  std::vector<Block> diag_;
  std::vector<Block> upper_;
};

bool is_chain(const FactorGraph& graph) {
  return std::all_of(graph.factors.begin(), graph.factors.end(),
                     [](const Factor& f) {
                       return f.num_epochs() == 1 || f.epoch(1) == f.epoch(0) + 1;
                     });
}

NormalEquations assemble(const FactorGraph& graph, bool dense, double& cost) {
  NormalEquations ne(graph.states.size(), dense);
  cost = 0.0;
  for (const auto& f : graph.factors) {
    const Whitened w = whiten(f, graph.states);
    cost += w.r.squaredNorm();
    ne.add(f, w);
  }
  return ne;
}

double state_norm(const std::vector<EpochState>& states) {
  double s = 0.0;
  for (const auto& x : states) s += x.vector().squaredNorm();
  return std::sqrt(s);
}

// Cost at a trial point; a geometry failure counts as an infinite cost so
// the step is rejected.
double trial_cost(const FactorGraph& graph,
                  std::span<const EpochState> states) {
  try {
    double cost = 0.0;
    for (const auto& f : graph.factors) {
      cost += whiten(f, states).r.squaredNorm();
    }
    return cost;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDegenerateGeometry) {
      return std::numeric_limits<double>::infinity();
    }
    throw;
  }
}

SolveReport optimize_batch(FactorGraph& graph, const SolverConfig& cfg) {
  const bool dense = cfg.dense || !is_chain(graph);
  SolveReport report;
  double cost = 0.0;
  NormalEquations ne = assemble(graph, dense, cost);
  if (!std::isfinite(cost)) {
    throw Error(ErrorKind::kNumericalFailure, "initial cost is not finite");
  }
  report.initial_cost = cost;
  report.final_cost = cost;

  const double grad_tol = 1e-12 * (1.0 + cost);
  if (cost == 0.0 || ne.gradient().lpNorm<Eigen::Infinity>() <= grad_tol) {
    report.converged = true;
    report.termination = "gradient";
    return report;
  }

  double lambda = cfg.initial_lambda;
  Eigen::VectorXd delta;
  while (report.iterations < cfg.max_iterations) {
    ++report.iterations;
    if (!ne.solve(lambda, delta)) {
      if (lambda >= kFailLambda) {
        throw Error(ErrorKind::kNumericalFailure,
                    "damped normal equations not solvable");
      }
      lambda = lambda > 0.0 ? lambda * cfg.lambda_up : kRestartLambda;
      continue;
    }
    const double x_norm = state_norm(graph.states);
    if (delta.norm() <= cfg.step_tolerance * (x_norm + cfg.step_tolerance)) {
      report.converged = true;
      report.termination = "step";
      break;
    }

    std::vector<EpochState> trial = graph.states;
    for (std::size_t k = 0; k < trial.size(); ++k) {
      trial[k] += delta.segment<8>(8 * static_cast<Eigen::Index>(k));
    }
    const double new_cost = trial_cost(graph, trial);
    if (std::isnan(new_cost)) {
      throw Error(ErrorKind::kNumericalFailure, "cost became NaN");
    }
    if (new_cost <= cost) {
      graph.states = std::move(trial);
      const double decrease = (cost - new_cost) / std::max(cost, 1e-300);
      cost = new_cost;
      lambda = std::max(lambda * cfg.lambda_down,
                        cfg.initial_lambda > 0.0 ? kMinLambda : 0.0);
      if (decrease <= cfg.cost_tolerance || cost == 0.0) {
        report.converged = true;
        report.termination = "cost";
        break;
      }
      double relin_cost = 0.0;
      ne = assemble(graph, dense, relin_cost);
    } else {
      lambda = lambda > 0.0 ? lambda * cfg.lambda_up : kRestartLambda;
      if (lambda > kMaxLambda) {
        report.converged = true;
        report.termination = "stationary";
        break;
      }
    }
  }
  if (!report.converged) report.termination = "max_iterations";
  report.final_cost = cost;
  return report;
}

// Consecutive batches of `window` epochs. Each later batch re-includes the
// last epoch of the previous one, pinned by a tight prior at its solution.
SolveReport optimize_windowed(FactorGraph& graph, const SolverConfig& cfg) {
  SolveReport total;
  total.initial_cost = graph_cost(graph);
  total.converged = true;
  const std::size_t n = graph.states.size();
  for (std::size_t start = 0; start < n; start += cfg.window) {
    const std::size_t first = start == 0 ? 0 : start - 1;
    const std::size_t end = std::min(start + cfg.window, n);
    FactorGraph sub;
    sub.states.assign(graph.states.begin() + static_cast<std::ptrdiff_t>(first),
                      graph.states.begin() + static_cast<std::ptrdiff_t>(end));
    sub.timestamps.assign(
        graph.timestamps.begin() + static_cast<std::ptrdiff_t>(first),
        graph.timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& f : graph.factors) {
      const std::size_t lo = f.epoch(0);
      const std::size_t hi = f.epoch(f.num_epochs() - 1);
      if (lo < first || hi >= end) continue;
      // Factors wholly on the pinned epoch were used by the previous batch.
      if (first < start && hi == first) continue;
      sub.factors.push_back(f.shifted(first));
    }
    if (first < start) {
      sub.factors.push_back(Factor::prior(
          0, sub.states[0].vector(),
          StateCovariance::Identity() * kAnchorVariance));
    }
    SolverConfig inner = cfg;
    inner.window = 0;
    const SolveReport r = optimize_batch(sub, inner);
    total.iterations += r.iterations;
    total.converged = total.converged && r.converged;
    for (std::size_t k = start; k < end; ++k) {
      graph.states[k] = sub.states[k - first];
    }
  }
  total.termination = total.converged ? "windowed" : "max_iterations";
  total.final_cost = graph_cost(graph);
  return total;
}

}  // namespace

void FactorGraph::validate() const {
  if (states.empty()) throw Error(ErrorKind::kEmptyGraph, "graph has no epochs");
  if (timestamps.size() != states.size()) {
    throw Error(ErrorKind::kInvalidArgument, "timestamps/states size mismatch");
  }
  std::vector<bool> touched(states.size(), false);
  for (const auto& f : factors) {
    for (std::size_t i = 0; i < f.num_epochs(); ++i) {
      if (f.epoch(i) >= states.size()) {
        throw Error(ErrorKind::kInvalidArgument, "factor epoch out of range");
      }
      touched[f.epoch(i)] = true;
    }
  }
  const auto loose = std::find(touched.begin(), touched.end(), false);
  if (loose != touched.end()) {
    throw Error(ErrorKind::kInvalidArgument,
                "epoch " + std::to_string(loose - touched.begin()) +
                    " is not connected to any factor");
  }
}

void SolverConfig::validate() const {
  if (max_iterations < 1 || !(initial_lambda >= 0.0) ||
      !(cost_tolerance > 0.0) || !(step_tolerance > 0.0)) {
    throw Error(ErrorKind::kConfigError, "invalid solver tolerances");
  }
  if (!(lambda_up > 1.0) || !(lambda_down > 0.0 && lambda_down < 1.0)) {
    throw Error(ErrorKind::kConfigError,
                "need lambda_up > 1 > lambda_down > 0");
  }
}

EpochState single_epoch_fix(const EpochObservations& obs,
                            const std::optional<WeightModel>& weights) {
  std::set<std::string> ids;
  for (const auto& o : obs) ids.insert(o.sat_id);
  if (ids.size() < 4) {
    throw Error(ErrorKind::kInsufficientSatellites,
                "need at least 4 satellites, have " + std::to_string(ids.size()));
  }
  const auto m = static_cast<Eigen::Index>(obs.size());

  Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
  if (weights) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& o = obs[static_cast<std::size_t>(i)];
      if (std::isfinite(o.elevation) && o.elevation > 0.0) {
        w(i) = 1.0 / pseudorange_variance(o.snr, o.elevation, *weights);
      }
    }
  }

  EpochState s;
  constexpr int kMaxIterations = 30;
  bool converged = false;
  for (int it = 0; it < kMaxIterations && !converged; ++it) {
    Eigen::MatrixXd h(m, 4);
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& o = obs[static_cast<std::size_t>(i)];
      const Eigen::Vector3d los = (o.sat_pos - s.p).normalized();
      h.block<1, 3>(i, 0) = -los.transpose();
      h(i, 3) = 1.0;
      r(i) = o.pseudorange - predict_pseudorange(s.p, s.clock_bias, o);
    }
    const Eigen::Matrix4d n = h.transpose() * w.asDiagonal() * h;
    if (condition_number(n) > kMaxCondition) {
      throw Error(ErrorKind::kSingularGeometry,
                  "pseudorange normal matrix is ill-conditioned");
    }
    const Eigen::Vector4d dx =
        n.ldlt().solve(h.transpose() * w.asDiagonal() * r);
    s.p += dx.head<3>();
    s.clock_bias += dx(3);
    converged = dx.head<3>().norm() < 1e-4;
  }
  if (!converged) {
    throw Error(ErrorKind::kSingularGeometry,
                "single-epoch least squares did not converge");
  }

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (std::isfinite(obs[i].doppler)) usable.push_back(i);
  }
  if (usable.size() < 4) return s;

  const auto k = static_cast<Eigen::Index>(usable.size());
  Eigen::MatrixXd a(k, 4);
  Eigen::VectorXd b(k);
  for (Eigen::Index row = 0; row < k; ++row) {
    const auto& o = obs[usable[static_cast<std::size_t>(row)]];
    const Eigen::Vector3d los = (o.sat_pos - s.p).normalized();
    const auto& ps = o.sat_pos;
    const auto& vs = o.sat_vel;
    a.block<1, 3>(row, 0) =
        (-los + kOmegaOverC * Eigen::Vector3d(ps.y(), -ps.x(), 0.0)).transpose();
    a(row, 3) = 1.0;
    b(row) = o.wavelength * o.doppler - los.dot(vs) -
             kOmegaOverC * (vs.y() * s.p.x() - vs.x() * s.p.y()) +
             o.sat_clock_drift;
  }
  const Eigen::Matrix4d n = a.transpose() * a;
  if (condition_number(n) > kMaxCondition) {
    throw Error(ErrorKind::kSingularGeometry,
                "range-rate normal matrix is ill-conditioned");
  }
  const Eigen::Vector4d v = n.ldlt().solve(a.transpose() * b);
  s.v = v.head<3>();
  s.clock_drift = v(3);
  return s;
}

FactorGraph build_graph(std::span<const double> times,
                        std::span<const EpochObservations> epochs,
                        std::span<const EpochDisplacement> displacements,
                        const FactorWeights& weights,
                        const EnabledFactors& enabled) {
  if (times.size() != epochs.size()) {
    throw Error(ErrorKind::kInvalidArgument, "times/epochs size mismatch");
  }
  const std::size_t n = times.size();
  if (n == 0) throw Error(ErrorKind::kEmptyGraph, "no epochs");
  for (std::size_t k = 1; k < n; ++k) {
    if (!(times[k] > times[k - 1])) {
      throw Error(ErrorKind::kInvalidDt, "epoch times must increase");
    }
  }

  std::vector<std::optional<Eigen::Vector3d>> delta(n > 0 ? n - 1 : 0);
  for (const auto& d : displacements) {
    if (d.epoch_index + 1 < n) delta[d.epoch_index] = d.delta_ecef;
  }
  if (enabled.pdr) {
    for (const auto& d : delta) {
      if (!d) {
        throw Error(ErrorKind::kInvalidArgument,
                    "PDR factors need one displacement per epoch interval");
      }
    }
  }

  // Initial values: per-epoch fix, otherwise dead reckoning from a neighbor.
  std::vector<std::optional<EpochState>> init(n);
  for (std::size_t k = 0; k < n; ++k) {
    try {
      init[k] = single_epoch_fix(epochs[k]);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientSatellites &&
          e.kind() != ErrorKind::kSingularGeometry &&
          e.kind() != ErrorKind::kDegenerateGeometry) {
        throw;
      }
    }
  }
  const auto first_fix = std::find_if(init.begin(), init.end(),
                                      [](const auto& s) { return s.has_value(); });
  if (first_fix == init.end()) {
    throw Error(ErrorKind::kEmptyGraph, "no epoch has a usable fix");
  }
  auto step = [&](const EpochState& from, std::size_t interval, double dt,
                  double sign) {
    EpochState to = from;
    const Eigen::Vector3d d = delta[interval] ? *delta[interval] : from.v * dt;
    to.p += sign * d;
    to.clock_bias += sign * from.clock_drift * dt;
    return to;
  };
  const auto k0 = static_cast<std::size_t>(first_fix - init.begin());
  for (std::size_t k = k0; k-- > 0;) {
    init[k] = step(*init[k + 1], k, times[k + 1] - times[k], -1.0);
  }
  for (std::size_t k = k0 + 1; k < n; ++k) {
    if (!init[k]) init[k] = step(*init[k - 1], k - 1, times[k] - times[k - 1], 1.0);
  }

  FactorGraph g;
  g.timestamps.assign(times.begin(), times.end());
  g.states.reserve(n);
  for (const auto& s : init) g.states.push_back(*s);

  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& o : epochs[k]) {
      g.factors.push_back(Factor::pseudorange(k, o, weights.weight_model));
      if (std::isfinite(o.doppler)) {
        g.factors.push_back(Factor::doppler(k, o, weights.weight_model));
      }
    }
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = times[k + 1] - times[k];
    if (enabled.pdr) g.factors.push_back(Factor::pdr(k, *delta[k], weights.sigma_pdr2));
    if (enabled.cv) g.factors.push_back(Factor::cv(k, dt, weights.sigma_cv2));
    if (enabled.smm) g.factors.push_back(Factor::smm(k, dt, weights.sigma_smm2));
  }
  return g;
}

double graph_cost(const FactorGraph& graph) {
  double cost = 0.0;
  for (const auto& f : graph.factors) {
    cost += whiten(f, graph.states).r.squaredNorm();
  }
  return cost;
}

SolveReport optimize(FactorGraph& graph, const SolverConfig& config) {
  config.validate();
  graph.validate();
  SolveReport report = config.window > 0 && config.window < graph.states.size()
                           ? optimize_windowed(graph, config)
                           : optimize_batch(graph, config);
  report.residuals = residual_report(graph);
  return report;
}

ResidualReport residual_report(const FactorGraph& graph) {
  static const char* kAxes[] = {"x", "y", "z"};
  static const char* kClock[] = {"bias", "drift"};
  ResidualReport out;
  for (const auto& f : graph.factors) {
    const Linearization lin = f.linearize(graph.states);
    auto& list = out[f.kind()];
    const std::string label = f.label();
    for (Eigen::Index i = 0; i < lin.residual.size(); ++i) {
      std::string name = label;
      if (name.empty()) {
        if (lin.residual.size() == 3) {
          name = kAxes[i];
        } else if (f.kind() == FactorKind::kClock) {
          name = kClock[i];
        } else {
          name = std::to_string(i);
        }
      }
      list.push_back({f.epoch(0), std::move(name), lin.residual(i)});
    }
  }
  return out;
}

}  // namespace gnsspdr
