// Bath correlation kernels, colored-noise sampling and the Girsanov memory.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hfd/types.hpp"

namespace hfd {

/// One exponential c * exp(-nu * tau) of the bath correlation function.
struct KernelTerm {
  Complex weight;
  Complex rate;

  friend bool operator==(const KernelTerm&, const KernelTerm&) = default;
};

/// alpha(t, s) = sum_m c_m exp(-nu_m (t - s)) for t >= s.
class CorrelationKernel {
 public:
  static constexpr int kDefaultDerivativeOrder = 64;

  explicit CorrelationKernel(std::vector<KernelTerm> terms, int j_max = kDefaultDerivativeOrder)
      : terms_(std::move(terms)), j_max_(j_max) {
    if (terms_.empty()) throw InvalidArgument("CorrelationKernel: kernel required (no terms)");
    if (j_max_ < 0) throw InvalidArgument("CorrelationKernel: j_max must be >= 0");
    for (const auto& t : terms_) {
      if (!(t.rate.real() > 0.0))
        throw InvalidArgument("CorrelationKernel: every rate needs a positive real part");
      if (!std::isfinite(t.weight.real()) || !std::isfinite(t.weight.imag()) || !std::isfinite(t.rate.imag()))
        throw InvalidArgument("CorrelationKernel: non-finite term");
    }
  }

  /// alpha(t, s) = (Gamma gamma / 2) exp(-gamma |t - s|).
  static CorrelationKernel ornstein_uhlenbeck(double big_gamma, double gamma,
                                              int j_max = kDefaultDerivativeOrder) {
    return CorrelationKernel({{Complex(0.5 * big_gamma * gamma, 0.0), Complex(gamma, 0.0)}}, j_max);
  }

  const std::vector<KernelTerm>& terms() const noexcept { return terms_; }
  int j_max() const noexcept { return j_max_; }
  bool single_exponential() const noexcept { return terms_.size() == 1; }

  Complex alpha0() const {
    Complex s = 0.0;
    for (const auto& t : terms_) s += t.weight;
    return s;
  }

  /// Real positive weights with real rates: the only case sample_path supports.
  bool samplable() const noexcept {
    for (const auto& t : terms_) {
      if (t.rate.imag() != 0.0 || t.weight.imag() != 0.0 || t.weight.real() < 0.0) return false;
    }
    return true;
  }

  friend bool operator==(const CorrelationKernel&, const CorrelationKernel&) = default;

 private:
  std::vector<KernelTerm> terms_;
  int j_max_;
};

inline Complex alpha(const CorrelationKernel& kernel, double tau) {
  if (tau < 0.0) throw InvalidArgument("alpha: tau must be >= 0 (pass |t - s|)");
  Complex s = 0.0;
  for (const auto& t : kernel.terms()) s += t.weight * std::exp(-t.rate * tau);
  return s;
}

/// j-th derivative of alpha(t, s) with respect to t, at t - s = tau.
inline Complex alpha_derivative(const CorrelationKernel& kernel, int j, double tau) {
  if (j < 0 || j > kernel.j_max())
    throw InvalidArgument("alpha_derivative: order " + std::to_string(j) + " outside [0, j_max]");
  if (tau < 0.0) throw InvalidArgument("alpha_derivative: tau must be >= 0");
  Complex s = 0.0;
  for (const auto& t : kernel.terms()) {
    Complex factor = 1.0;
    for (int i = 0; i < j; ++i) factor *= -t.rate;
    s += t.weight * factor * std::exp(-t.rate * tau);
  }
  return s;
}

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of trajectory `index` in an ensemble; independent of execution order.
constexpr std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return mix64(mix64(master_seed) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Samples of z*_t on the half-step grid 0, dt/2, dt, ..., T.
class NoisePath {
 public:
  NoisePath() = default;
  NoisePath(double dt, std::vector<Complex> half_grid, std::uint64_t seed)
      : dt_(dt), samples_(std::move(half_grid)), seed_(seed) {
    if (!(dt_ > 0.0)) throw InvalidArgument("NoisePath: dt must be positive");
    if (samples_.size() < 3 || samples_.size() % 2 == 0)
      throw InvalidArgument("NoisePath: half grid needs 2N+1 samples with N >= 1");
  }

  /// A zero path with `steps` full steps; used for deterministic runs.
  static NoisePath zeros(double dt, std::size_t steps) {
    return NoisePath(dt, std::vector<Complex>(2 * steps + 1, Complex(0.0)), 0);
  }

  double dt() const noexcept { return dt_; }
  std::size_t step_count() const noexcept { return (samples_.size() - 1) / 2; }
  double horizon() const noexcept { return dt_ * static_cast<double>(step_count()); }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<Complex>& half_grid() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }

  Complex at_half(std::size_t i) const { return samples_.at(i); }
  double time_of_half(std::size_t i) const { return 0.5 * dt_ * static_cast<double>(i); }

  /// Every `factor`-th half-grid sample: the same realization on a coarser grid.
  NoisePath coarsened(std::size_t factor) const {
    if (factor == 0 || (samples_.size() - 1) % (2 * factor) != 0)
      throw InvalidArgument("NoisePath::coarsened: factor must divide the step count");
    std::vector<Complex> out;
    out.reserve((samples_.size() - 1) / factor + 1);
    for (std::size_t i = 0; i < samples_.size(); i += factor) out.push_back(samples_[i]);
    return NoisePath(dt_ * static_cast<double>(factor), std::move(out), seed_);
  }

 private:
  double dt_ = 0.0;
  std::vector<Complex> samples_;
  std::uint64_t seed_ = 0;
};

/// Stationary complex Gaussian path with <z_t z*_s> = alpha(|t-s|), <z_t z_s> = 0.
/// Each term is an independent complex OU process built from two real
/// quadratures of variance c/2, advanced with the exact discretization.
inline NoisePath sample_path(const CorrelationKernel& kernel, double horizon, double dt, std::uint64_t seed) {
  if (!(dt > 0.0)) throw InvalidArgument("sample_path: dt must be positive");
  if (!(horizon >= dt)) throw InvalidArgument("sample_path: horizon must be >= dt");
  if (!kernel.samplable())
    throw InvalidArgument("sample_path: only real rates with real nonnegative weights can be sampled");

  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  const std::size_t n = 2 * steps + 1;
  const double h = 0.5 * dt;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Complex> samples(n, Complex(0.0));
  for (const auto& term : kernel.terms()) {
    const double sigma = std::sqrt(0.5 * term.weight.real());
    const double decay = std::exp(-term.rate.real() * h);
    const double kick = sigma * std::sqrt(-std::expm1(-2.0 * term.rate.real() * h));
    double x = sigma * normal(rng);
    double y = sigma * normal(rng);
    samples[0] += Complex(x, y);
    for (std::size_t i = 1; i < n; ++i) {
      x = x * decay + kick * normal(rng);
      y = y * decay + kick * normal(rng);
      samples[i] += Complex(x, y);
    }
  }
  return NoisePath(dt, std::move(samples), seed);
}

namespace detail {

/// J_n = int_0^h exp(-lambda u) u^n du for n = 0, 1, 2.
inline std::array<Complex, 3> exponential_moments(Complex lambda, double h) {
  std::array<Complex, 3> out{};
  const Complex x = lambda * h;
  if (std::abs(x) < 0.5) {
    for (int n = 0; n < 3; ++n) {
      Complex sum = 0.0;
      Complex term = 1.0;  // (-x)^k / k!
      for (int k = 0; k < 30; ++k) {
        sum += term / static_cast<double>(n + k + 1);
        term *= -x / static_cast<double>(k + 1);
      }
      out[n] = sum * std::pow(h, n + 1);
    }
    return out;
  }
  const Complex e = std::exp(-x);
  out[0] = (1.0 - e) / lambda;
  out[1] = (out[0] - h * e) / lambda;
  out[2] = (2.0 * out[1] - h * h * e) / lambda;
  return out;
}

}  // namespace detail

/// Per-term accumulators of int_0^t alpha*(t,s) <L^dag>_s ds.
class GirsanovMemory {
 public:
  explicit GirsanovMemory(std::size_t terms = 0) : m_(terms, Complex(0.0)) {}

  const std::vector<Complex>& accumulators() const noexcept { return m_; }
  std::vector<Complex>& accumulators() noexcept { return m_; }

  Complex shift() const noexcept {
    Complex s = 0.0;
    for (auto v : m_) s += v;
    return s;
  }

 private:
  std::vector<Complex> m_;
};

/// Advances the memory over one substep with <L^dag> held constant (exact for
/// a constant signal). Returns the new shift.
inline Complex girsanov_shift(GirsanovMemory& memory, const CorrelationKernel& kernel, Complex expectation_ldag,
                              double dt_sub) {
  auto& m = memory.accumulators();
  if (m.size() != kernel.terms().size()) m.assign(kernel.terms().size(), Complex(0.0));
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& t = kernel.terms()[i];
    const Complex lambda = std::conj(t.rate);
    const auto j = detail::exponential_moments(lambda, dt_sub);
    m[i] = m[i] * std::exp(-lambda * dt_sub) + std::conj(t.weight) * expectation_ldag * j[0];
  }
  return memory.shift();
}

/// Same update with <L^dag> given at the start, midpoint and end of the
/// substep; the signal is integrated exactly as the interpolating quadratic.
inline Complex girsanov_shift(GirsanovMemory& memory, const CorrelationKernel& kernel, Complex ldag_start,
                              Complex ldag_mid, Complex ldag_end, double dt_sub) {
  auto& m = memory.accumulators();
  if (m.size() != kernel.terms().size()) m.assign(kernel.terms().size(), Complex(0.0));
  const double h = dt_sub;
  // quadratic in u = h - s (u = 0 at the end of the substep)
  const Complex a0 = ldag_end;
  const Complex a1 = (4.0 * ldag_mid - 3.0 * ldag_end - ldag_start) / h;
  const Complex a2 = 2.0 * (ldag_end - 2.0 * ldag_mid + ldag_start) / (h * h);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& t = kernel.terms()[i];
    const Complex lambda = std::conj(t.rate);
    const auto j = detail::exponential_moments(lambda, h);
    m[i] = m[i] * std::exp(-lambda * h) + std::conj(t.weight) * (a0 * j[0] + a1 * j[1] + a2 * j[2]);
  }
  return memory.shift();
}

}  // namespace hfd
