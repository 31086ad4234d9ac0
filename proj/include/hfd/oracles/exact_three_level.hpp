// Closed two-operator system for H = omega J_z, L = J_- (spin 1) with OU noise.
// The O operator of this model is linear in the noise, so Q_0 and Q_1 are the
// whole hierarchy and these equations are exact.
#pragma once

#include <span>

#include "hfd/model.hpp"
#include "hfd/noise.hpp"
#include "hfd/trajectory.hpp"

namespace hfd::oracles {

class ExactThreeLevel {
 public:
  ExactThreeLevel(double big_gamma, double gamma) : alpha0_(0.5 * big_gamma * gamma), gamma_(gamma) {
    const auto s = angular_momentum(2);
    l_ = s.jminus;
    ldag_ = l_.adjoint();
  }

  void set_hamiltonian(const Mat<3>& h) { minus_i_h_ = -kI * h; }

  std::size_t size() const { return 2; }
  const Mat<3>& o_bar(std::span<const Mat<3>> q) { return q[0]; }

  void rhs(double, Complex z, std::span<const Mat<3>> q, std::span<Mat<3>> dq) {
    const Mat<3>& q0 = q[0];
    const Mat<3>& q1 = q[1];
    const Mat<3> k = minus_i_h_ + z * l_;
    const Mat<3> k0 = k - ldag_ * q0;
    const Mat<3> ldq0 = ldag_ * q0;
    const Mat<3> ldq1 = ldag_ * q1;
    // dQ0 = a0 L - g Q0 - L^dag Q1 + [-iH + L z - L^dag Q0, Q0]
    dq[0] = alpha0_ * l_ - gamma_ * q0 - ldq1 + (k0 * q0 - q0 * k0);
    // dQ1 = a0 [L, Q0] - 2g Q1 + [-iH + L z, Q1] - [L^dag Q0, Q1] - [L^dag Q1, Q0]
    dq[1] = alpha0_ * (l_ * q0 - q0 * l_) - 2.0 * gamma_ * q1 + (k * q1 - q1 * k) - (ldq0 * q1 - q1 * ldq0) -
            (ldq1 * q0 - q0 * ldq1);
  }

 private:
  double alpha0_;
  double gamma_;
  Mat<3> l_, ldag_, minus_i_h_ = Mat<3>::Zero();
};

inline SystemSpec three_level_system(double omega) { return presets::three_level(omega); }

/// Exact trajectory of the three-level model on a given noise path.
inline TrajectoryRecord<3> exact_three_level(double omega, double big_gamma, double gamma, const NoisePath& path,
                                             double dt, double horizon, PropagationOptions opts = {}) {
  const SystemSpec spec = presets::three_level(omega);
  SystemMatrices<3> sys(spec);
  ExactThreeLevel h(big_gamma, gamma);
  h.set_hamiltonian(sys.hamiltonian);
  opts.dt = dt;
  TrajectoryPropagator<3, ExactThreeLevel> prop(sys, CorrelationKernel::ornstein_uhlenbeck(big_gamma, gamma), h,
                                                opts);
  return record_trajectory(prop, path, step_count(horizon, dt));
}

}  // namespace hfd::oracles
