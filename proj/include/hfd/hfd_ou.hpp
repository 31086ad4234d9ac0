// Production engine: the compact hierarchy Q_0 ... Q_N for a single
// exponential kernel alpha(t,s) = c exp(-nu (t-s)).
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hfd/combinatorics.hpp"
#include "hfd/linalg.hpp"
#include "hfd/model.hpp"
#include "hfd/noise.hpp"
#include "hfd/trajectory.hpp"
#include "hfd/types.hpp"

namespace hfd {

enum class Truncation {
  zero,        // Q_{N+1} = 0
  commutator,  // Q_{N+1} = A(t) [L, Q_N], A(t) = int_0^t alpha(t,s) ds
};

inline std::string to_string(Truncation t) { return t == Truncation::zero ? "zero" : "commutator"; }

/// Operators Q_0 ... Q_N. order 0 is the lowest-order closure (Q_0 alone).
template <int D>
class OUHierarchy {
 public:
  OUHierarchy(const SystemMatrices<D>& sys, const CorrelationKernel& kernel, int order,
              Truncation truncation = Truncation::zero)
      : order_(order), truncation_(truncation), l_(sys.lindblad), ldag_(sys.lindblad_dag), minus_i_h_(sys.minus_i_h) {
    if (order < 0) throw InvalidArgument("OUHierarchy: order must be >= 0");
    if (order > kMaxBinomialRow) throw InvalidArgument("OUHierarchy: order above 60 unsupported");
    if (!kernel.single_exponential())
      throw InvalidArgument("OUHierarchy: needs a single-exponential kernel (use the general engine)");
    alpha0_ = kernel.terms()[0].weight;
    rate_ = kernel.terms()[0].rate;
    const auto d = sys.dim;
    a_.assign(static_cast<std::size_t>(order) + 2, zero_matrix<D>(d));
    k_ = zero_matrix<D>(d);
    tmp_ = k_;
    closure_ = k_;
  }

  std::size_t size() const { return static_cast<std::size_t>(order_) + 1; }
  int order() const noexcept { return order_; }
  Truncation truncation() const noexcept { return truncation_; }

  const Mat<D>& o_bar(std::span<const Mat<D>> q) { return q[0]; }

  /// A(t) = (c / nu) (1 - exp(-nu t)).
  Complex integrated_kernel(double t) const { return alpha0_ / rate_ * (1.0 - std::exp(-rate_ * t)); }

  void rhs(double t, Complex z, std::span<const Mat<D>> q, std::span<Mat<D>> dq) {
    const int n = order_;
    // Q_{N+1} from the truncation rule
    const Mat<D>* q_next = nullptr;
    if (truncation_ == Truncation::commutator) {
      closure_.noalias() = l_ * q[n];
      closure_.noalias() -= q[n] * l_;
      closure_ *= integrated_kernel(t);
      q_next = &closure_;
    }
    for (int i = 0; i <= n; ++i) a_[i].noalias() = ldag_ * q[i];

    k_ = minus_i_h_ + z * l_;
    for (int k = 0; k <= n; ++k) {
      Mat<D>& out = dq[k];
      const Mat<D>& qk = q[k];
      out.noalias() = k_ * qk;
      out.noalias() -= qk * k_;
      out -= static_cast<double>(k + 1) * rate_ * qk;
      if (k == 0) {
        out += alpha0_ * l_;
      } else {
        tmp_.noalias() = l_ * q[k - 1];
        tmp_.noalias() -= q[k - 1] * l_;
        out += static_cast<double>(k) * alpha0_ * tmp_;
      }
      if (k < n) {
        out -= a_[k + 1];
      } else if (q_next != nullptr) {
        out.noalias() -= ldag_ * (*q_next);
      }
      for (int i = 0; i <= k; ++i) {
        const double c = static_cast<double>(binomial(k, i));
        tmp_.noalias() = a_[i] * q[k - i];
        tmp_.noalias() -= q[k - i] * a_[i];
        out -= c * tmp_;
      }
    }
  }

 private:
  int order_;
  Truncation truncation_;
  Complex alpha0_, rate_;
  Mat<D> l_, ldag_, minus_i_h_;
  std::vector<Mat<D>> a_;
  Mat<D> k_, tmp_, closure_;
};

/// Free-function form of the hierarchy equations; allocates, for tests and tools.
template <int D>
std::vector<Mat<D>> hierarchy_rhs(const std::vector<Mat<D>>& q, const SystemMatrices<D>& sys,
                                  const CorrelationKernel& kernel, Complex z_shifted,
                                  Truncation truncation = Truncation::zero, double t = 0.0) {
  if (q.empty()) throw InvalidArgument("hierarchy_rhs: empty hierarchy");
  for (const auto& m : q)
    if (m.rows() != sys.dim || m.cols() != sys.dim) throw InvalidArgument("hierarchy_rhs: dimension mismatch");
  OUHierarchy<D> h(sys, kernel, static_cast<int>(q.size()) - 1, truncation);
  std::vector<Mat<D>> dq(q.size(), zero_matrix<D>(sys.dim));
  h.rhs(t, z_shifted, std::span<const Mat<D>>(q), std::span<Mat<D>>(dq));
  return dq;
}

struct OUTrajectoryOptions {
  int order = 10;
  Truncation truncation = Truncation::zero;
  PropagationOptions propagation{};
};

/// One trajectory of the OU engine, recorded at every full step.
template <int D>
TrajectoryRecord<D> propagate(const SystemSpec& spec, const CorrelationKernel& kernel, const NoisePath& path,
                              const OUTrajectoryOptions& opts, double horizon) {
  SystemMatrices<D> sys(spec);
  TrajectoryPropagator<D, OUHierarchy<D>> prop(sys, kernel, OUHierarchy<D>(sys, kernel, opts.order, opts.truncation),
                                               opts.propagation);
  return record_trajectory(prop, path, step_count(horizon, opts.propagation.dt));
}

/// Smallest k with max_t |Q_{k+1}| < rel_tol * max_t |Q_0|, or -1 if none.
inline int natural_termination(const std::vector<double>& max_norms, double rel_tol) {
  if (max_norms.empty()) return -1;
  const double ref = max_norms[0];
  if (ref == 0.0) return 0;
  for (std::size_t k = 0; k + 1 < max_norms.size(); ++k)
    if (max_norms[k + 1] < rel_tol * ref) return static_cast<int>(k);
  return -1;
}

}  // namespace hfd
