// Hierarchy-of-pure-states vectors rebuilt from the Q_k operators.
#pragma once

#include <vector>

#include "hfd/combinatorics.hpp"
#include "hfd/types.hpp"

namespace hfd::oracles {

/// |psi_k> = sum_{i<k} C(k-1, i) Q_i |psi_{k-i-1}>, for k = 0 ... depth.
template <int D>
std::vector<Vec<D>> hops_states(const std::vector<Mat<D>>& q, const Vec<D>& psi0, int depth) {
  if (depth < 0) throw InvalidArgument("hops_states: depth must be >= 0");
  if (static_cast<std::size_t>(depth) > q.size())
    throw InvalidArgument("hops_states: depth exceeds the available hierarchy order");
  std::vector<Vec<D>> out;
  out.reserve(static_cast<std::size_t>(depth) + 1);
  out.push_back(psi0);
  for (int k = 1; k <= depth; ++k) {
    Vec<D> acc = Vec<D>::Zero(psi0.size());
    for (int i = 0; i < k; ++i) acc += static_cast<double>(binomial(k - 1, i)) * (q[i] * out[k - i - 1]);
    out.push_back(std::move(acc));
  }
  return out;
}

/// Same vectors from the unrolled expansion: a sum over ordered block sizes
/// (b_1, ..., b_r) of k of  prod_i C(rem_i - 1, b_i - 1) Q_{b_1-1} ... Q_{b_r-1} |psi_0>,
/// where rem_i is what is left of k before block i. Each term counts the set
/// partitions of k derivative applications whose blocks, ordered by first
/// element, have those sizes.
template <int D>
std::vector<Vec<D>> hops_states_expanded(const std::vector<Mat<D>>& q, const Vec<D>& psi0, int depth) {
  if (depth < 0 || static_cast<std::size_t>(depth) > q.size())
    throw InvalidArgument("hops_states_expanded: depth exceeds the available hierarchy order");
  std::vector<Vec<D>> out;
  out.push_back(psi0);
  for (int k = 1; k <= depth; ++k) {
    Vec<D> acc = Vec<D>::Zero(psi0.size());
    // compositions of k enumerated by the bit pattern of cut positions
    const unsigned long cuts = 1UL << (k - 1);
    for (unsigned long mask = 0; mask < cuts; ++mask) {
      std::vector<int> sizes;
      int run = 1;
      for (int b = 0; b < k - 1; ++b) {
        if (mask & (1UL << b)) {
          sizes.push_back(run);
          run = 1;
        } else {
          ++run;
        }
      }
      sizes.push_back(run);
      double weight = 1.0;
      int remaining = k;
      for (int s : sizes) {
        weight *= static_cast<double>(binomial(remaining - 1, s - 1));
        remaining -= s;
      }
      Vec<D> v = psi0;
      for (auto it = sizes.rbegin(); it != sizes.rend(); ++it) v = (q[*it - 1] * v).eval();
      acc += weight * v;
    }
    out.push_back(std::move(acc));
  }
  return out;
}

}  // namespace hfd::oracles
