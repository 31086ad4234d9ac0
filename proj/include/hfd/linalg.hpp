// Small dense helpers shared by the engines and oracles.
#pragma once

#include <cmath>

#include <Eigen/SVD>

#include "hfd/types.hpp"

namespace hfd {

/// <psi|A|psi> / <psi|psi>.
template <class VecT, class MatT>
Complex expectation(const VecT& psi, const MatT& a) {
  const double n2 = psi.squaredNorm();
  if (!(n2 > 0.0)) throw InvalidArgument("expectation: zero state vector");
  return psi.dot(a * psi) / n2;
}

/// Sum of singular values, Tr sqrt(Q^dag Q).
template <class MatT>
double trace_norm(const MatT& q) {
  using Plain = typename MatT::PlainObject;
  if (q.size() == 0) return 0.0;
  Eigen::JacobiSVD<Plain> svd(q);
  return svd.singularValues().sum();
}

template <class A, class B>
auto commutator(const A& a, const B& b) {
  return (a * b - b * a).eval();
}

template <class MatT>
bool all_finite(const MatT& m) {
  return m.allFinite();
}

}  // namespace hfd
