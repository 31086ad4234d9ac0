// Joint fixed-step RK4 propagation of a QSD trajectory and an operator hierarchy.
//
// A hierarchy supplies the equations for a flat list of d x d operators and
// names the operator (or sum of operators) that plays the role of O-bar in the
// state equation. The propagator owns the state vector, the Girsanov memory
// and the noise bookkeeping, so every engine and oracle shares one integrator.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hfd/linalg.hpp"
#include "hfd/model.hpp"
#include "hfd/noise.hpp"
#include "hfd/types.hpp"

namespace hfd {

template <class H, int D>
concept Hierarchy = requires(H h, double t, Complex z, std::span<const Mat<D>> q, std::span<Mat<D>> dq) {
  { h.size() } -> std::convertible_to<std::size_t>;
  h.rhs(t, z, q, dq);
  { h.o_bar(q) } -> std::convertible_to<const Mat<D>&>;
};

enum class QsdForm {
  nonlinear,  // normalized state, Girsanov-shifted noise
  linear,     // unnormalized state, raw noise (debug only)
};

struct PropagationOptions {
  double dt = 0.01;
  bool renormalize = true;
  QsdForm form = QsdForm::nonlinear;
};

template <int D>
struct JointState {
  Vec<D> psi;
  std::vector<Complex> memory;
  std::vector<Mat<D>> q;

  JointState() = default;
  JointState(Eigen::Index dim, std::size_t terms, std::size_t mats)
      : psi(zero_vector<D>(dim)), memory(terms, Complex(0.0)), q(mats, zero_matrix<D>(dim)) {}

  // out = base + h * k
  static void axpy(JointState& out, const JointState& base, double h, const JointState& k) {
    out.psi.noalias() = base.psi + h * k.psi;
    for (std::size_t i = 0; i < base.memory.size(); ++i) out.memory[i] = base.memory[i] + h * k.memory[i];
    for (std::size_t i = 0; i < base.q.size(); ++i) out.q[i].noalias() = base.q[i] + h * k.q[i];
  }
};

/// One trajectory sample handed to observers after every full step.
template <int D>
struct StepView {
  std::size_t step;
  double time;
  const Vec<D>& psi;
  std::span<const Mat<D>> q;
};

template <int D, Hierarchy<D> H>
class TrajectoryPropagator {
 public:
  TrajectoryPropagator(SystemMatrices<D> sys, CorrelationKernel kernel, H hierarchy, PropagationOptions opts = {})
      : sys_(std::move(sys)),
        kernel_(std::move(kernel)),
        hier_(std::move(hierarchy)),
        opts_(opts),
        y_(sys_.dim, kernel_.terms().size(), hier_.size()),
        tmp_(y_),
        k1_(y_),
        k2_(y_),
        k3_(y_),
        k4_(y_) {
    if (!(opts_.dt > 0.0)) throw InvalidArgument("propagate: dt must be positive");
    lpsi_ = zero_vector<D>(sys_.dim);
    v_ = lpsi_;
    w_ = lpsi_;
  }

  H& hierarchy() noexcept { return hier_; }
  const JointState<D>& state() const noexcept { return y_; }

  /// Integrates over `steps` full steps, reading the path at t, t+dt/2, t+dt.
  /// The path's dt must divide the integrator dt. Observer sees t = 0 and
  /// every full step.
  template <class Observer>
  void run(const NoisePath& path, std::size_t steps, Observer&& observe) {
    const double ratio = opts_.dt / path.dt();
    const auto stride = static_cast<std::size_t>(std::llround(ratio));
    if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio)
      throw InvalidArgument("propagate: integrator dt must be a multiple of the noise dt");
    if (steps * stride > path.step_count()) throw InvalidArgument("propagate: noise path shorter than horizon");

    reset();
    const double h = opts_.dt;
    observe(StepView<D>{0, 0.0, y_.psi, std::span<const Mat<D>>(y_.q)});
    double last_norm = 0.0;
    for (std::size_t n = 0; n < steps; ++n) {
      const double t = h * static_cast<double>(n);
      const std::size_t base = 2 * n * stride;
      const Complex z0 = path.at_half(base);
      const Complex zm = path.at_half(base + stride);
      const Complex z1 = path.at_half(base + 2 * stride);

      evaluate(t, z0, y_, k1_);
      JointState<D>::axpy(tmp_, y_, 0.5 * h, k1_);
      evaluate(t + 0.5 * h, zm, tmp_, k2_);
      JointState<D>::axpy(tmp_, y_, 0.5 * h, k2_);
      evaluate(t + 0.5 * h, zm, tmp_, k3_);
      JointState<D>::axpy(tmp_, y_, h, k3_);
      evaluate(t + h, z1, tmp_, k4_);

      const double w = h / 6.0;
      y_.psi += w * (k1_.psi + 2.0 * k2_.psi + 2.0 * k3_.psi + k4_.psi);
      for (std::size_t i = 0; i < y_.memory.size(); ++i)
        y_.memory[i] += w * (k1_.memory[i] + 2.0 * k2_.memory[i] + 2.0 * k3_.memory[i] + k4_.memory[i]);
      for (std::size_t i = 0; i < y_.q.size(); ++i)
        y_.q[i] += w * (k1_.q[i] + 2.0 * k2_.q[i] + 2.0 * k3_.q[i] + k4_.q[i]);

      const double t_next = h * static_cast<double>(n + 1);
      if (!finite_state()) {
        throw PropagationError(t_next, last_norm,
                               "non-finite trajectory state at t = " + std::to_string(t_next) +
                                   " (last max |Q_k| = " + std::to_string(last_norm) + ")");
      }
      last_norm = max_q_norm();
      if (opts_.renormalize) y_.psi /= y_.psi.norm();
      observe(StepView<D>{n + 1, t_next, y_.psi, std::span<const Mat<D>>(y_.q)});
    }
  }

 private:
  void reset() {
    y_.psi = sys_.initial_state;
    for (auto& m : y_.memory) m = 0.0;
    for (auto& q : y_.q) q.setZero();
  }

  bool finite_state() const {
    if (!y_.psi.allFinite()) return false;
    for (auto m : y_.memory)
      if (!std::isfinite(m.real()) || !std::isfinite(m.imag())) return false;
    for (const auto& q : y_.q)
      if (!q.allFinite()) return false;
    return true;
  }

  double max_q_norm() const {
    double m = 0.0;
    for (const auto& q : y_.q) m = std::max(m, q.norm());
    return m;
  }

  void evaluate(double t, Complex z_raw, const JointState<D>& y, JointState<D>& dy) {
    const auto& psi = y.psi;
    const double n2 = psi.squaredNorm();
    std::span<const Mat<D>> q(y.q);
    std::span<Mat<D>> dq(dy.q);

    lpsi_.noalias() = sys_.lindblad * psi;
    const Mat<D>& obar = hier_.o_bar(q);
    v_.noalias() = obar * psi;
    w_.noalias() = sys_.lindblad_dag * v_;

    if (opts_.form == QsdForm::linear) {
      dy.psi.noalias() = sys_.minus_i_h * psi;
      dy.psi += z_raw * lpsi_ - w_;
      for (auto& m : dy.memory) m = 0.0;
      hier_.rhs(t, z_raw, q, dq);
      return;
    }

    const Complex exp_l = psi.dot(lpsi_) / n2;
    const Complex exp_ldag = std::conj(exp_l);
    const Complex exp_o = psi.dot(v_) / n2;
    const Complex exp_ldag_o = psi.dot(w_) / n2;

    Complex shift = 0.0;
    for (std::size_t i = 0; i < y.memory.size(); ++i) {
      const auto& term = kernel_.terms()[i];
      dy.memory[i] = std::conj(term.weight) * exp_ldag - std::conj(term.rate) * y.memory[i];
      shift += y.memory[i];
    }
    const Complex z = z_raw + shift;

    // [-iH + Delta(L) z - Delta(L^dag) O + <Delta(L^dag) O>] psi
    dy.psi.noalias() = sys_.minus_i_h * psi;
    dy.psi += z * (lpsi_ - exp_l * psi);
    dy.psi -= w_ - exp_ldag * v_;
    dy.psi += (exp_ldag_o - exp_ldag * exp_o) * psi;

    hier_.rhs(t, z, q, dq);
  }

  SystemMatrices<D> sys_;
  CorrelationKernel kernel_;
  H hier_;
  PropagationOptions opts_;
  JointState<D> y_, tmp_, k1_, k2_, k3_, k4_;
  Vec<D> lpsi_, v_, w_;
};

/// Recorded output of a single trajectory.
template <int D>
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Vec<D>> psi;
  std::vector<std::vector<Mat<D>>> q;
};

template <int D, Hierarchy<D> H>
TrajectoryRecord<D> record_trajectory(TrajectoryPropagator<D, H>& prop, const NoisePath& path, std::size_t steps) {
  TrajectoryRecord<D> rec;
  rec.times.reserve(steps + 1);
  rec.psi.reserve(steps + 1);
  rec.q.reserve(steps + 1);
  prop.run(path, steps, [&](const StepView<D>& s) {
    rec.times.push_back(s.time);
    rec.psi.push_back(s.psi);
    rec.q.emplace_back(s.q.begin(), s.q.end());
  });
  return rec;
}

/// Number of full steps of size dt covering [0, horizon].
inline std::size_t step_count(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon > 0.0)) throw InvalidArgument("step_count: dt and horizon must be positive");
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

/// Runs two hierarchies on the same noise: the driver closes the state
/// equation, the follower is evolved with the driver's shifted noise.
template <int D, class Driver, class Follower>
class PairedHierarchy {
 public:
  PairedHierarchy(Driver driver, Follower follower) : a_(std::move(driver)), b_(std::move(follower)) {}

  std::size_t size() const { return a_.size() + b_.size(); }

  void rhs(double t, Complex z, std::span<const Mat<D>> q, std::span<Mat<D>> dq) {
    a_.rhs(t, z, q.first(a_.size()), dq.first(a_.size()));
    b_.rhs(t, z, q.subspan(a_.size()), dq.subspan(a_.size()));
  }

  const Mat<D>& o_bar(std::span<const Mat<D>> q) { return a_.o_bar(q.first(a_.size())); }

  Driver& driver() noexcept { return a_; }
  Follower& follower() noexcept { return b_; }
  std::size_t driver_size() const { return a_.size(); }

 private:
  Driver a_;
  Follower b_;
};

}  // namespace hfd
