#pragma once

// Constant-velocity Kalman filter over a box anchor (x, y).

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ltmot {

struct KalmanParams {
  double init_position_var = 100.0;   // px^2
  double init_velocity_var = 1000.0;  // (px/frame)^2
  double process_noise = 1.0;         // white-acceleration spectral density, px^2/frame^3
  double measurement_noise = 1.0;     // px^2
};

struct Observation {
  std::int64_t frame = 0;
  double x = 0.0;
  double y = 0.0;
};

/// State (x, y, vx, vy). Position in pixels, velocity in pixels per frame.
class ConstantVelocityKalman {
 public:
  using Vector4 = Eigen::Vector4d;
  using Matrix4 = Eigen::Matrix4d;

  ConstantVelocityKalman(double x, double y, const KalmanParams& params = {}) : params_(params) {
    state_ << x, y, 0.0, 0.0;
    cov_ = Vector4(params.init_position_var, params.init_position_var, params.init_velocity_var,
                   params.init_velocity_var)
               .asDiagonal();
  }

  /// Advances by `dt` frames; process noise grows with the gap.
  void predict(double dt = 1.0) {
    Matrix4 f = Matrix4::Identity();
    f(0, 2) = dt;
    f(1, 3) = dt;
    const double q = params_.process_noise;
    const double dt2 = dt * dt;
    const double dt3 = dt2 * dt;
    Matrix4 qm = Matrix4::Zero();
    qm(0, 0) = qm(1, 1) = q * dt3 / 3.0;
    qm(0, 2) = qm(2, 0) = qm(1, 3) = qm(3, 1) = q * dt2 / 2.0;
    qm(2, 2) = qm(3, 3) = q * dt;
    state_ = f * state_;
    cov_ = f * cov_ * f.transpose() + qm;
    symmetrize();
  }

  void update(double x, double y) {
    Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * params_.measurement_noise;
    const Eigen::Vector2d innovation = Eigen::Vector2d(x, y) - h * state_;
    const Eigen::Matrix2d s = h * cov_ * h.transpose() + r;
    const Eigen::Matrix<double, 4, 2> gain = cov_ * h.transpose() * s.inverse();
    state_ += gain * innovation;
    // Joseph form.
    const Matrix4 ikh = Matrix4::Identity() - gain * h;
    cov_ = ikh * cov_ * ikh.transpose() + gain * r * gain.transpose();
    symmetrize();
  }

  const Vector4& state() const { return state_; }
  const Matrix4& covariance() const { return cov_; }
  Eigen::Vector2d position() const { return state_.head<2>(); }

 private:
  void symmetrize() { cov_ = (0.5 * (cov_ + cov_.transpose())).eval(); }

  KalmanParams params_;
  Vector4 state_;
  Matrix4 cov_;
};

/// Filters `observations` (frame order, gaps allowed) and then predicts
/// `horizon` further single-frame steps past the last observation. The
/// optional observer sees the covariance after every predict and update.
inline std::vector<Eigen::Vector2d> kalman_predict_series(
    const std::vector<Observation>& observations, std::size_t horizon, const KalmanParams& params = {},
    const std::function<void(const Eigen::Matrix4d&)>& observer = {}) {
  std::vector<Eigen::Vector2d> out;
  if (observations.empty()) return out;
  ConstantVelocityKalman kf(observations.front().x, observations.front().y, params);
  if (observer) observer(kf.covariance());
  for (std::size_t i = 1; i < observations.size(); ++i) {
    kf.predict(static_cast<double>(observations[i].frame - observations[i - 1].frame));
    if (observer) observer(kf.covariance());
    kf.update(observations[i].x, observations[i].y);
    if (observer) observer(kf.covariance());
  }
  out.reserve(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    kf.predict(1.0);
    if (observer) observer(kf.covariance());
    out.push_back(kf.position());
  }
  return out;
}

}  // namespace ltmot
