// Noise-order hierarchy Q_m^(n) for OU noise (0 <= m <= n <= N): m kernel
// contractions out of an n-th order functional expansion term.
#pragma once

#include <span>
#include <vector>

#include "hfd/combinatorics.hpp"
#include "hfd/model.hpp"
#include "hfd/noise.hpp"
#include "hfd/trajectory.hpp"

namespace hfd::oracles {

/// Position of Q_m^(n) in the flat store.
constexpr std::size_t sde_index(int m, int n) {
  return static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) + 1) / 2 + static_cast<std::size_t>(m);
}

constexpr std::size_t sde_count(int order) { return sde_index(0, order + 1); }

struct SdeKey {
  int m;
  int n;
  friend bool operator==(const SdeKey&, const SdeKey&) = default;
};

inline std::vector<SdeKey> sde_keys(int order) {
  std::vector<SdeKey> keys;
  for (int n = 0; n <= order; ++n)
    for (int m = 0; m <= n; ++m) keys.push_back({m, n});
  return keys;
}

template <int D>
class SdeHierarchy {
 public:
  SdeHierarchy(const SystemMatrices<D>& sys, const CorrelationKernel& kernel, int order)
      : order_(order), l_(sys.lindblad), ldag_(sys.lindblad_dag), minus_i_h_(sys.minus_i_h) {
    if (order < 0 || order > 30) throw InvalidArgument("SdeHierarchy: order must be in [0, 30]");
    if (!kernel.single_exponential() || !kernel.samplable())
      throw InvalidArgument("SdeHierarchy: requires an Ornstein-Uhlenbeck kernel");
    alpha0_ = kernel.terms()[0].weight.real();
    gamma_ = kernel.terms()[0].rate.real();
    build_plan();
    const auto d = sys.dim;
    a_.assign(sde_count(order), zero_matrix<D>(d));
    obar_ = zero_matrix<D>(d);
    tmp_ = obar_;
    k_ = obar_;
  }

  std::size_t size() const { return sde_count(order_); }
  int order() const noexcept { return order_; }

  const Mat<D>& o_bar(std::span<const Mat<D>> q) {
    obar_.setZero();
    for (int n = 0; n <= order_; ++n) obar_ += q[sde_index(0, n)];
    return obar_;
  }

  void rhs(double, Complex z, std::span<const Mat<D>> q, std::span<Mat<D>> dq) {
    for (std::size_t i = 0; i < q.size(); ++i) a_[i].noalias() = ldag_ * q[i];
    for (const auto& eq : plan_) {
      Mat<D>& out = dq[eq.self];
      const Mat<D>& qs = q[eq.self];
      out.noalias() = minus_i_h_ * qs;
      out.noalias() -= qs * minus_i_h_;
      out -= eq.damping * qs;
      if (eq.source) out += alpha0_ * l_;
      if (eq.lower_k >= 0) {
        tmp_.noalias() = l_ * q[eq.lower_k];
        tmp_.noalias() -= q[eq.lower_k] * l_;
        out += eq.lower_k_coef * alpha0_ * tmp_;
      }
      if (eq.lower_n >= 0) {
        tmp_.noalias() = l_ * q[eq.lower_n];
        tmp_.noalias() -= q[eq.lower_n] * l_;
        out += (eq.lower_n_coef * z) * tmp_;
      }
      if (eq.upper >= 0) out -= eq.upper_coef * a_[eq.upper];
      for (const auto& nl : eq.nonlinear) {
        tmp_.noalias() = a_[nl.left] * q[nl.right];
        tmp_.noalias() -= q[nl.right] * a_[nl.left];
        out -= nl.coef * tmp_;
      }
    }
  }

  /// Q_k = sum_{n=k}^{N} n!/(n-k)! Q_k^(n).
  Mat<D> grouped(std::span<const Mat<D>> q, int k) const {
    Mat<D> out = Mat<D>::Zero(q[0].rows(), q[0].cols());
    for (int n = k; n <= order_; ++n) out += falling_factorial_value(n, k) * q[sde_index(k, n)];
    return out;
  }

 private:
  struct NonlinearTerm {
    double coef;
    std::size_t left;   // index of Q_{p-l}^(p), multiplied by L^dag
    std::size_t right;  // index of Q_{k-p+l}^(n-p)
  };

  struct Equation {
    std::size_t self;
    double damping;
    bool source;
    long lower_k = -1;
    double lower_k_coef = 0.0;
    long lower_n = -1;
    double lower_n_coef = 0.0;
    long upper = -1;
    double upper_coef = 0.0;
    std::vector<NonlinearTerm> nonlinear;
  };

  void build_plan() {
    for (int n = 0; n <= order_; ++n) {
      for (int k = 0; k <= n; ++k) {
        Equation eq;
        eq.self = sde_index(k, n);
        eq.damping = static_cast<double>(k + 1) * gamma_;
        eq.source = (n == 0);
        const double inv = 1.0 / static_cast<double>(std::max(1, n));
        if (k >= 1 && n >= 1) {
          eq.lower_k = static_cast<long>(sde_index(k - 1, n - 1));
          eq.lower_k_coef = static_cast<double>(k) * inv;
        }
        if (n - 1 >= k) {
          eq.lower_n = static_cast<long>(sde_index(k, n - 1));
          eq.lower_n_coef = static_cast<double>(n - k) * inv;
        }
        if (n + 1 <= order_) {
          eq.upper = static_cast<long>(sde_index(k + 1, n + 1));
          eq.upper_coef = static_cast<double>(n + 1);
        }
        for (int p = 0; p <= n; ++p) {
          for (int l = std::max(0, p - k); l <= std::min(p, n - k); ++l) {
            const Fraction f = sde_nonlinear_coefficient(n, k, p, l);
            if (f.num == 0) continue;
            eq.nonlinear.push_back({f.value(), sde_index(p - l, p), sde_index(k - p + l, n - p)});
          }
        }
        plan_.push_back(std::move(eq));
      }
    }
  }

  int order_;
  double alpha0_ = 0.0, gamma_ = 0.0;
  Mat<D> l_, ldag_, minus_i_h_;
  std::vector<Equation> plan_;
  std::vector<Mat<D>> a_;
  Mat<D> obar_, tmp_, k_;
};

}  // namespace hfd::oracles
