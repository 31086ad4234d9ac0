// Core scalar/matrix aliases and the dimension dispatch used by every engine.
#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include <Eigen/Dense>

namespace hfd {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

// Dense complex operators. Fixed-size instantiations are used for the common
// qubit / qutrit / two-qubit cases, everything else falls back to Dynamic.
template <int D>
using Mat = Eigen::Matrix<Complex, D, D, (D == 1 ? Eigen::ColMajor : Eigen::RowMajor)>;

template <int D>
using Vec = Eigen::Matrix<Complex, D, 1>;

using MatX = Mat<Eigen::Dynamic>;
using VecX = Vec<Eigen::Dynamic>;

/// Thrown for malformed inputs (dimension mismatch, bad kernel, bad order...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a trajectory produces a non-finite value.
class PropagationError : public std::runtime_error {
 public:
  PropagationError(double time, double max_q_norm, const std::string& what)
      : std::runtime_error(what), time_(time), max_q_norm_(max_q_norm) {}

  double time() const noexcept { return time_; }
  double max_q_norm() const noexcept { return max_q_norm_; }

 private:
  double time_;
  double max_q_norm_;
};

template <int D>
using DimTag = std::integral_constant<int, D>;

/// Calls f(DimTag<D>{}) with a compile-time dimension when one is available.
template <class F>
decltype(auto) dispatch_dimension(Eigen::Index dim, F&& f) {
  switch (dim) {
    case 2:
      return std::forward<F>(f)(DimTag<2>{});
    case 3:
      return std::forward<F>(f)(DimTag<3>{});
    case 4:
      return std::forward<F>(f)(DimTag<4>{});
    default:
      return std::forward<F>(f)(DimTag<Eigen::Dynamic>{});
  }
}

template <int D>
Mat<D> zero_matrix(Eigen::Index dim) {
  if constexpr (D == Eigen::Dynamic) {
    return Mat<D>::Zero(dim, dim);
  } else {
    return Mat<D>::Zero();
  }
}

template <int D>
Vec<D> zero_vector(Eigen::Index dim) {
  if constexpr (D == Eigen::Dynamic) {
    return Vec<D>::Zero(dim);
  } else {
    return Vec<D>::Zero();
  }
}

}  // namespace hfd
