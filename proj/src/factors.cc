#include "gnsspdr/factors.h"

#include <cmath>

#include <Eigen/Cholesky>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {

constexpr double kOmegaOverC =
    EarthConstants::kOmegaEarth / EarthConstants::kSpeedOfLight;

void check_dt(double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidDt, "dt must be positive");
}

Linearization make(int rows, int cols) {
  Linearization lin;
  lin.residual.setZero(rows);
  lin.jacobian.setZero(rows, cols);
  return lin;
}

}  // namespace

StateVector EpochState::vector() const {
  StateVector x;
  x << p, v, clock_bias, clock_drift;
  return x;
}

EpochState EpochState::from_vector(const StateVector& x) {
  EpochState s;
  s.p = x.segment<3>(0);
  s.v = x.segment<3>(3);
  s.clock_bias = x(6);
  s.clock_drift = x(7);
  return s;
}

EpochState& EpochState::operator+=(const StateVector& delta) {
  p += delta.segment<3>(0);
  v += delta.segment<3>(3);
  clock_bias += delta(6);
  clock_drift += delta(7);
  return *this;
}

std::string_view to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::kPseudorange: return "pseudorange";
    case FactorKind::kDoppler: return "doppler";
    case FactorKind::kPdr: return "pdr";
    case FactorKind::kCv: return "cv";
    case FactorKind::kSmm: return "smm";
    case FactorKind::kClock: return "clock";
    case FactorKind::kPrior: return "prior";
    case FactorKind::kLinear: return "linear";
  }
  return "unknown";
}

void FactorWeights::validate() const {
  if (!(sigma_pdr2 > 0.0) || !(sigma_cv2 > 0.0) || !(sigma_smm2 > 0.0) ||
      !(clock_bias_var > 0.0) || !(clock_drift_var > 0.0)) {
    throw Error(ErrorKind::kConfigError, "factor variances must be positive");
  }
  weight_model.validate();
}

Linearization pseudorange_residual(const EpochState& x,
                                   const SatObservation& obs) {
  auto lin = make(1, kStateDim);
  lin.residual(0) =
      obs.pseudorange - predict_pseudorange(x.p, x.clock_bias, obs);
  const Eigen::Vector3d los = (obs.sat_pos - x.p).normalized();
  lin.jacobian.block<1, 3>(0, 0) = los.transpose();
  lin.jacobian(0, 6) = -1.0;
  return lin;
}

Linearization doppler_residual(const EpochState& x, const SatObservation& obs) {
  auto lin = make(1, kStateDim);
  lin.residual(0) = obs.wavelength * obs.doppler -
                    predict_range_rate(x.p, x.v, x.clock_drift, obs);

  const Eigen::Vector3d diff = obs.sat_pos - x.p;
  const double range = diff.norm();
  const Eigen::Vector3d los = diff / range;
  const Eigen::Vector3d rel_vel = obs.sat_vel - x.v;
  const auto& ps = obs.sat_pos;
  const auto& vs = obs.sat_vel;

  // d(range rate)/d(p_rx): line-of-sight direction change plus rotation term.
  const Eigen::Vector3d d_rr_dp =
      -(rel_vel - los * los.dot(rel_vel)) / range +
      kOmegaOverC * Eigen::Vector3d(vs.y(), -vs.x(), 0.0);
  const Eigen::Vector3d d_rr_dv =
      -los + kOmegaOverC * Eigen::Vector3d(ps.y(), -ps.x(), 0.0);

  lin.jacobian.block<1, 3>(0, 0) = -d_rr_dp.transpose();
  lin.jacobian.block<1, 3>(0, 3) = -d_rr_dv.transpose();
  lin.jacobian(0, 7) = -1.0;
  return lin;
}

Linearization pdr_residual(const EpochState& x0, const EpochState& x1,
                           const Eigen::Vector3d& delta_ecef) {
  auto lin = make(3, 2 * kStateDim);
  lin.residual = delta_ecef - (x1.p - x0.p);
  lin.jacobian.block<3, 3>(0, 0).setIdentity();
  lin.jacobian.block<3, 3>(0, kStateDim) = -Eigen::Matrix3d::Identity();
  return lin;
}

Linearization cv_residual(const EpochState& x0, const EpochState& x1,
                          double dt) {
  check_dt(dt);
  auto lin = make(3, 2 * kStateDim);
  lin.residual = (x1.p - x0.p) / dt - 0.5 * (x0.v + x1.v);
  const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
  lin.jacobian.block<3, 3>(0, 0) = -i3 / dt;
  lin.jacobian.block<3, 3>(0, 3) = -0.5 * i3;
  lin.jacobian.block<3, 3>(0, kStateDim) = i3 / dt;
  lin.jacobian.block<3, 3>(0, kStateDim + 3) = -0.5 * i3;
  return lin;
}

Linearization smm_residual(const EpochState& x0, const EpochState& x1,
                           double dt) {
  check_dt(dt);
  auto lin = make(3, 2 * kStateDim);
  lin.residual = -(x1.v - x0.v) / dt;
  const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
  lin.jacobian.block<3, 3>(0, 3) = i3 / dt;
  lin.jacobian.block<3, 3>(0, kStateDim + 3) = -i3 / dt;
  return lin;
}

Linearization clock_residual(const EpochState& x0, const EpochState& x1,
                             double dt) {
  check_dt(dt);
  auto lin = make(2, 2 * kStateDim);
  lin.residual(0) = x1.clock_bias - x0.clock_bias - dt * x0.clock_drift;
  lin.residual(1) = x1.clock_drift - x0.clock_drift;
  lin.jacobian(0, 6) = -1.0;
  lin.jacobian(0, 7) = -dt;
  lin.jacobian(0, kStateDim + 6) = 1.0;
  lin.jacobian(1, 7) = -1.0;
  lin.jacobian(1, kStateDim + 7) = 1.0;
  return lin;
}

Linearization prior_residual(const EpochState& x, const StateVector& mean) {
  auto lin = make(kStateDim, kStateDim);
  lin.residual = x.vector() - mean;
  lin.jacobian.setIdentity();
  return lin;
}

Linearization linear_residual(const EpochState& x, const Eigen::MatrixXd& h,
                              const Eigen::VectorXd& z) {
  auto lin = make(static_cast<int>(h.rows()), kStateDim);
  lin.residual = z - h * x.vector();
  lin.jacobian = -h;
  return lin;
}

Factor::Factor(FactorKind kind, std::size_t first, std::size_t count,
               Payload payload, const Eigen::MatrixXd& covariance)
    : kind_(kind), num_epochs_(count), payload_(std::move(payload)) {
  epochs_ = {first, first + count - 1};
  if (covariance.rows() != covariance.cols() || covariance.rows() < 1 ||
      covariance.rows() > kMaxResidualDim) {
    throw Error(ErrorKind::kInvalidArgument, "bad factor covariance shape");
  }
  covariance_ = covariance;
  const auto n = covariance.rows();
  const Eigen::MatrixXd off_diagonal =
      covariance - Eigen::MatrixXd(covariance.diagonal().asDiagonal());
  const bool diagonal = off_diagonal.cwiseAbs().maxCoeff() == 0.0;
  whitener_.setZero(n, n);
  if (diagonal) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(covariance(i, i) > 0.0)) {
        throw Error(ErrorKind::kInvalidArgument,
                    "factor covariance must be positive definite");
      }
      whitener_(i, i) = 1.0 / std::sqrt(covariance(i, i));
    }
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kInvalidArgument,
                "factor covariance must be positive definite");
  }
  const Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  whitener_ = l_inv;
}

std::string Factor::label() const {
  if (const auto* obs = std::get_if<SatObservation>(&payload_)) return obs->sat_id;
  return {};
}

Linearization Factor::linearize(std::span<const EpochState> states) const {
  const EpochState& x0 = states[epochs_[0]];
  switch (kind_) {
    case FactorKind::kPseudorange:
      return pseudorange_residual(x0, std::get<SatObservation>(payload_));
    case FactorKind::kDoppler:
      return doppler_residual(x0, std::get<SatObservation>(payload_));
    case FactorKind::kPdr:
      return pdr_residual(x0, states[epochs_[1]],
                          std::get<Eigen::Vector3d>(payload_));
    case FactorKind::kCv:
      return cv_residual(x0, states[epochs_[1]], std::get<double>(payload_));
    case FactorKind::kSmm:
      return smm_residual(x0, states[epochs_[1]], std::get<double>(payload_));
    case FactorKind::kClock:
      return clock_residual(x0, states[epochs_[1]], std::get<double>(payload_));
    case FactorKind::kPrior:
      return prior_residual(x0, std::get<StateVector>(payload_));
    case FactorKind::kLinear: {
      const auto& m = std::get<LinearMeasurement>(payload_);
      return linear_residual(x0, m.h, m.z);
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown factor kind");
}

Factor Factor::shifted(std::size_t offset) const {
  if (epochs_[0] < offset) {
    throw Error(ErrorKind::kInvalidArgument, "factor shift below epoch 0");
  }
  Factor out = *this;
  out.epochs_[0] -= offset;
  out.epochs_[1] -= offset;
  return out;
}

Factor Factor::pseudorange(std::size_t epoch, const SatObservation& obs,
                           const WeightModel& w) {
  Eigen::MatrixXd cov(1, 1);
  cov(0, 0) = pseudorange_variance(obs.snr, obs.elevation, w);
  return Factor(FactorKind::kPseudorange, epoch, 1,
                Payload(std::in_place_type<SatObservation>, obs), cov);
}

Factor Factor::doppler(std::size_t epoch, const SatObservation& obs,
                       const WeightModel& w) {
  Eigen::MatrixXd cov(1, 1);
  cov(0, 0) = doppler_variance(obs.snr, obs.elevation, w);
  return Factor(FactorKind::kDoppler, epoch, 1,
                Payload(std::in_place_type<SatObservation>, obs), cov);
}

Factor Factor::pdr(std::size_t epoch, const Eigen::Vector3d& delta_ecef,
                   double sigma2) {
  return Factor(FactorKind::kPdr, epoch, 2,
                Payload(std::in_place_type<Eigen::Vector3d>, delta_ecef),
                sigma2 * Eigen::MatrixXd::Identity(3, 3));
}

Factor Factor::cv(std::size_t epoch, double dt, double sigma2) {
  check_dt(dt);
  return Factor(FactorKind::kCv, epoch, 2,
                Payload(std::in_place_type<double>, dt),
                sigma2 * Eigen::MatrixXd::Identity(3, 3));
}

Factor Factor::smm(std::size_t epoch, double dt, double sigma2) {
  check_dt(dt);
  return Factor(FactorKind::kSmm, epoch, 2,
                Payload(std::in_place_type<double>, dt),
                sigma2 * Eigen::MatrixXd::Identity(3, 3));
}

Factor Factor::clock(std::size_t epoch, double dt, double bias_var,
                     double drift_var) {
  check_dt(dt);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  cov(0, 0) = bias_var;
  cov(1, 1) = drift_var;
  return Factor(FactorKind::kClock, epoch, 2,
                Payload(std::in_place_type<double>, dt), cov);
}

Factor Factor::prior(std::size_t epoch, const StateVector& mean,
                     const StateCovariance& covariance) {
  return Factor(FactorKind::kPrior, epoch, 1,
                Payload(std::in_place_type<StateVector>, mean), covariance);
}

Factor Factor::linear(std::size_t epoch, const LinearMeasurement& m,
                      const Eigen::MatrixXd& covariance) {
  if (m.h.cols() != kStateDim || m.h.rows() != m.z.rows() ||
      covariance.rows() != m.h.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "linear factor shape mismatch");
  }
  return Factor(FactorKind::kLinear, epoch, 1,
                Payload(std::in_place_type<LinearMeasurement>, m), covariance);
}

}  // namespace gnsspdr
