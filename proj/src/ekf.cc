#include "gnsspdr/ekf.h"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "gnsspdr/errors.h"
#include "gnsspdr/solver.h"

namespace gnsspdr {

namespace {

void symmetrize(StateCovariance& p) { p = 0.5 * (p + p.transpose()).eval(); }

struct Stacked {
  Eigen::MatrixXd jacobian;  // d residual / d state
  Eigen::VectorXd residual;
  Eigen::VectorXd variance;
};

Stacked stack(const EpochState& x, const EpochObservations& obs,
              const WeightModel& w) {
  std::vector<Linearization> lins;
  std::vector<double> vars;
  for (const auto& o : obs) {
    lins.push_back(pseudorange_residual(x, o));
    vars.push_back(pseudorange_variance(o.snr, o.elevation, w));
    if (std::isfinite(o.doppler)) {
      lins.push_back(doppler_residual(x, o));
      vars.push_back(doppler_variance(o.snr, o.elevation, w));
    }
  }
  const auto m = static_cast<Eigen::Index>(lins.size());
  Stacked s{Eigen::MatrixXd(m, kStateDim), Eigen::VectorXd(m),
            Eigen::VectorXd(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& lin = lins[static_cast<std::size_t>(i)];
    s.jacobian.row(i) = lin.jacobian.row(0);
    s.residual(i) = lin.residual(0);
    s.variance(i) = vars[static_cast<std::size_t>(i)];
  }
  return s;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

Eigen::VectorXd select(const Eigen::VectorXd& v,
                       const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  }
  return out;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

}  // namespace

ProcessNoise ProcessNoise::from_weights(const FactorWeights& w) {
  return {w.sigma_pdr2, w.sigma_smm2, w.clock_bias_var, w.clock_drift_var};
}

StateCovariance ProcessNoise::matrix(double dt) const {
  StateVector d;
  const double vel = acceleration_var * dt * dt;
  d << position_var, position_var, position_var, vel, vel, vel, clock_bias_var,
      clock_drift_var;
  return d.asDiagonal();
}

EkfState ekf_predict(const EkfState& state, const Eigen::Vector3d& delta_ecef,
                     double dt, const ProcessNoise& q) {
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidDt, "dt must be positive");
  EkfState out = state;
  out.mean.p += delta_ecef;
  out.mean.clock_bias += state.mean.clock_drift * dt;
  StateCovariance f = StateCovariance::Identity();
  f(6, 7) = dt;
  out.covariance = f * state.covariance * f.transpose() + q.matrix(dt);
  symmetrize(out.covariance);
  return out;
}

EkfState ekf_predict_cv(const EkfState& state, double dt,
                        const ProcessNoise& q) {
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidDt, "dt must be positive");
  EkfState out = state;
  out.mean.p += state.mean.v * dt;
  out.mean.clock_bias += state.mean.clock_drift * dt;
  StateCovariance f = StateCovariance::Identity();
  f.block<3, 3>(0, 3) = dt * Eigen::Matrix3d::Identity();
  f(6, 7) = dt;
  out.covariance = f * state.covariance * f.transpose() + q.matrix(dt);
  symmetrize(out.covariance);
  return out;
}

EkfState ekf_update_linear(const EkfState& state, const Eigen::MatrixXd& h,
                           const Eigen::VectorXd& z, const Eigen::MatrixXd& r) {
  if (h.cols() != kStateDim || h.rows() != z.rows() || r.rows() != z.rows() ||
      r.cols() != z.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "update shape mismatch");
  }
  if (z.size() == 0) return state;
  const StateCovariance& p = state.covariance;
  const Eigen::MatrixXd s = h * p * h.transpose() + r;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumericalFailure, "innovation covariance singular");
  }
  const Eigen::MatrixXd k = ldlt.solve(h * p).transpose();
  EkfState out;
  out.mean = EpochState::from_vector(state.mean.vector() +
                                     k * (z - h * state.mean.vector()));
  const StateCovariance a = StateCovariance::Identity() - k * h;
  out.covariance = a * p * a.transpose() + k * r * k.transpose();
  symmetrize(out.covariance);
  return out;
}

EkfState ekf_update(const EkfState& state, const EpochObservations& obs,
                    const EkfConfig& cfg) {
  if (obs.empty()) return state;
  const WeightModel& w = cfg.weights.weight_model;
  const StateVector prior = state.mean.vector();
  const StateCovariance& p = state.covariance;

  std::optional<std::vector<Eigen::Index>> keep;
  EpochState iterate = state.mean;
  Eigen::MatrixXd h, k, r;
  for (int pass = 0; pass < std::max(cfg.update_passes, 1); ++pass) {
    const Stacked s = stack(iterate, obs, w);
    if (!keep) {
      keep = all_rows(s.residual.size());
      if (cfg.innovation_gating) {
        // Gate once, at the prior.
        std::vector<Eigen::Index> passed;
        for (Eigen::Index i = 0; i < s.residual.size(); ++i) {
          const auto hi = s.jacobian.row(i);
          const double var = (hi * p * hi.transpose())(0, 0) + s.variance(i);
          if (s.residual(i) * s.residual(i) / var <= cfg.gate_chi2) {
            passed.push_back(i);
          }
        }
        keep = std::move(passed);
      }
      if (keep->empty()) return state;
    }
    // Measurement matrix is the negated residual Jacobian.
    h = -select_rows(s.jacobian, *keep);
    r = select(s.variance, *keep).asDiagonal();
    const Eigen::VectorXd innovation =
        select(s.residual, *keep) - h * (prior - iterate.vector());
    const Eigen::MatrixXd sm = h * p * h.transpose() + r;
    k = sm.ldlt().solve(h * p).transpose();
    iterate = EpochState::from_vector(prior + k * innovation);
  }
  EkfState out;
  out.mean = iterate;
  const StateCovariance a = StateCovariance::Identity() - k * h;
  out.covariance = a * p * a.transpose() + k * r * k.transpose();
  symmetrize(out.covariance);
  return out;
}

EkfRun run_ekf(std::span<const double> times,
               std::span<const EpochObservations> epochs,
               std::span<const EpochDisplacement> displacements,
               const EkfConfig& cfg) {
  const std::size_t n = times.size();
  if (epochs.size() != n) {
    throw Error(ErrorKind::kInvalidArgument, "times/epochs size mismatch");
  }
  if (n == 0) throw Error(ErrorKind::kEmptyGraph, "no epochs");
  std::vector<Eigen::Vector3d> delta(n - 1, Eigen::Vector3d::Zero());
  std::vector<bool> have(n - 1, false);
  for (const auto& d : displacements) {
    if (d.epoch_index + 1 < n) {
      delta[d.epoch_index] = d.delta_ecef;
      have[d.epoch_index] = true;
    }
  }
  if (std::find(have.begin(), have.end(), false) != have.end()) {
    throw Error(ErrorKind::kInvalidArgument,
                "EKF needs one displacement per epoch interval");
  }

  std::size_t k0 = n;
  EpochState fix;
  for (std::size_t k = 0; k < n && k0 == n; ++k) {
    try {
      fix = single_epoch_fix(epochs[k]);
      k0 = k;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientSatellites &&
          e.kind() != ErrorKind::kSingularGeometry &&
          e.kind() != ErrorKind::kDegenerateGeometry) {
        throw;
      }
    }
  }
  if (k0 == n) throw Error(ErrorKind::kEmptyGraph, "no epoch has a usable fix");

  const ProcessNoise q = ProcessNoise::from_weights(cfg.weights);
  EkfRun run;
  run.states.resize(n);
  EkfState x;
  x.mean = fix;
  x.covariance = cfg.initial_variance.asDiagonal();
  x = ekf_update(x, epochs[k0], cfg);
  run.states[k0] = x;
  for (std::size_t k = k0 + 1; k < n; ++k) {
    const double dt = times[k] - times[k - 1];
    if (cfg.pdr_as_measurement) {
      x = ekf_predict_cv(x, dt, q);
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, kStateDim);
      h.block<3, 3>(0, 3).setIdentity();
      const Eigen::MatrixXd r =
          Eigen::MatrixXd::Identity(3, 3) * (q.position_var / (dt * dt));
      x = ekf_update_linear(x, h, delta[k - 1] / dt, r);
    } else {
      x = ekf_predict(x, delta[k - 1], dt, q);
    }
    x = ekf_update(x, epochs[k], cfg);
    run.states[k] = x;
  }
  for (std::size_t k = k0; k-- > 0;) {
    EkfState back = run.states[k + 1];
    back.mean.p -= delta[k];
    back.mean.clock_bias -= back.mean.clock_drift * (times[k + 1] - times[k]);
    run.states[k] = back;
  }
  return run;
}

}  // namespace gnsspdr
