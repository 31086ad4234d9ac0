// General-kernel engine: operators Q_k^(j) indexed by a hierarchy level k and
// a derivative multi-index j = (j_0, j_1, ..., j_k). The operators are
// symmetric under permutations of (j_1 ... j_k), so only sorted tails are
// stored and every reference is canonicalized before lookup.
//
// The right-hand side is compiled once per (order, closure) into a list of
// index/coefficient terms; evaluation is then a flat loop over matrices.
#pragma once

#include <algorithm>
#include <compare>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hfd/combinatorics.hpp"
#include "hfd/model.hpp"
#include "hfd/noise.hpp"
#include "hfd/trajectory.hpp"
#include "hfd/types.hpp"

namespace hfd {

struct IndexKey {
  int k = 0;
  std::vector<int> j{0};  // (j_0, j_1, ..., j_k)

  int weight() const { return k + std::accumulate(j.begin(), j.end(), 0); }

  friend auto operator<=>(const IndexKey&, const IndexKey&) = default;
  friend bool operator==(const IndexKey&, const IndexKey&) = default;
};

inline IndexKey make_key(std::vector<int> j) {
  if (j.empty()) throw InvalidArgument("make_key: j needs at least j_0");
  IndexKey key;
  key.k = static_cast<int>(j.size()) - 1;
  key.j = std::move(j);
  return key;
}

/// Sorts the tail (j_1 ... j_k); j_0 keeps its place.
inline IndexKey canonicalize(IndexKey key) {
  if (key.j.size() > 1) std::sort(key.j.begin() + 1, key.j.end());
  return key;
}

inline std::string to_string(const IndexKey& key) {
  std::string s = "(" + std::to_string(key.k) + ",(";
  for (std::size_t i = 0; i < key.j.size(); ++i) s += (i ? "," : "") + std::to_string(key.j[i]);
  return s + "))";
}

namespace detail {

// Tails of length len with entries in [lo, cap] and sum <= budget, lexicographic.
inline void tails(int len, int lo, int cap, int budget, bool sorted, std::vector<int>& cur,
                  const std::function<void(const std::vector<int>&)>& emit) {
  if (len == 0) {
    emit(cur);
    return;
  }
  for (int v = sorted ? lo : 0; v <= std::min(cap, budget); ++v) {
    cur.push_back(v);
    tails(len - 1, v, cap, budget - v, sorted, cur, emit);
    cur.pop_back();
  }
}

inline std::vector<IndexKey> enumerate(int order, int cap, bool sorted) {
  if (order < 0) throw InvalidArgument("enumerate_keys: order must be >= 0");
  std::vector<IndexKey> keys;
  for (int k = 0; k <= order; ++k) {
    for (int j0 = 0; j0 <= std::min(cap, order - k); ++j0) {
      std::vector<int> cur{j0};
      tails(k, 0, cap, order - k - j0, sorted, cur, [&](const std::vector<int>& j) { keys.push_back(make_key(j)); });
    }
  }
  return keys;
}

}  // namespace detail

/// Canonical keys with weight k + sum(j) <= order, ordered by (k, j).
inline std::vector<IndexKey> enumerate_keys(int order) {
  return detail::enumerate(order, order, true);
}

/// Every key with weight <= order, permuted tails included.
inline std::vector<IndexKey> enumerate_all_keys(int order) {
  return detail::enumerate(order, order, false);
}

struct Closure {
  enum class Kind { truncate_zero, geometric };
  Kind kind = Kind::truncate_zero;
  Complex ratio = 0.0;  // a in Q^(j_max + 1) = a Q^(j_max)
  int j_max = 0;

  static Closure truncate_zero() { return {}; }
  static Closure geometric(Complex a, int j_max) { return {Kind::geometric, a, j_max}; }
  /// a = -nu for a single exponential kernel, where the closure is exact.
  static Closure geometric_for(const CorrelationKernel& kernel, int j_max) {
    if (!kernel.single_exponential())
      throw InvalidArgument("geometric closure requires a single-exponential kernel");
    return geometric(-kernel.terms()[0].rate, j_max);
  }
};

enum class KeyStorage { canonical, full };

/// Compiled equations for one (order, closure, kernel); shared by trajectories.
class GeneralPlan {
 public:
  struct Linear {
    std::size_t src;
    Complex coef;
  };
  struct Bilinear {
    std::size_t left;  // multiplied by L^dag
    std::size_t right;
    Complex coef;
  };
  struct Equation {
    std::vector<Linear> commutator_l;  // coef [L, Q_src]
    std::vector<Linear> self;          // coef Q_src
    std::vector<Linear> upper;         // coef L^dag Q_src
    Complex source = 0.0;              // coef L
    std::vector<Bilinear> nonlinear;   // coef [L^dag Q_left, Q_right]
  };

  GeneralPlan(const CorrelationKernel& kernel, int order, Closure closure, KeyStorage storage = KeyStorage::canonical)
      : order_(order), closure_(closure), storage_(storage) {
    if (order < 0) throw InvalidArgument("GeneralPlan: order must be >= 0");
    if (order > 20) throw InvalidArgument("GeneralPlan: order above 20 unsupported");
    if (closure.kind == Closure::Kind::geometric) {
      if (!kernel.single_exponential())
        throw InvalidArgument("GeneralPlan: geometric closure needs a single-exponential kernel");
      if (closure.j_max < 0) throw InvalidArgument("GeneralPlan: j_max must be >= 0");
    }
    const int cap = closure.kind == Closure::Kind::geometric ? std::min(closure.j_max, order) : order;
    keys_ = detail::enumerate(order, cap, storage == KeyStorage::canonical);
    for (std::size_t i = 0; i < keys_.size(); ++i) index_.emplace(keys_[i], i);

    const int max_j = order + 1;
    if (kernel.j_max() < std::min(max_j, cap))
      throw InvalidArgument("GeneralPlan: kernel derivative order j_max is below the hierarchy order");
    for (int j = 0; j <= std::min(max_j, kernel.j_max()); ++j) alpha_deriv0_.push_back(alpha_derivative(kernel, j, 0.0));

    for (const auto& key : keys_) equations_.push_back(compile(key));
  }

  int order() const noexcept { return order_; }
  const std::vector<IndexKey>& keys() const noexcept { return keys_; }
  const std::vector<Equation>& equations() const noexcept { return equations_; }
  KeyStorage storage() const noexcept { return storage_; }

  /// Store position of a key, after closure resolution; nullopt means zero.
  std::optional<std::pair<std::size_t, Complex>> resolve(const IndexKey& key) const {
    if (key.k > order_) return std::nullopt;
    IndexKey r = key;
    Complex f = 1.0;
    if (closure_.kind == Closure::Kind::geometric) {
      for (auto& v : r.j) {
        while (v > closure_.j_max) {
          --v;
          f *= closure_.ratio;
        }
      }
      while (r.weight() > order_) {
        auto it = std::max_element(r.j.rbegin(), r.j.rend());
        --*it;
        f *= closure_.ratio;
      }
    } else if (r.weight() > order_) {
      return std::nullopt;
    }
    if (storage_ == KeyStorage::canonical) r = canonicalize(std::move(r));
    auto it = index_.find(r);
    if (it == index_.end()) throw std::logic_error("GeneralPlan: unresolved key " + to_string(r));
    return std::make_pair(it->second, f);
  }

  std::size_t index_of(const IndexKey& key) const {
    auto r = resolve(key);
    if (!r || r->second != Complex(1.0)) throw InvalidArgument("GeneralPlan: key not stored: " + to_string(key));
    return r->first;
  }

 private:
  Complex alpha_d0(int j) const {
    if (j < 0 || static_cast<std::size_t>(j) >= alpha_deriv0_.size())
      throw InvalidArgument("GeneralPlan: derivative order beyond kernel j_max");
    return alpha_deriv0_[j];
  }

  static void add(std::vector<Linear>& v, std::size_t src, Complex c) {
    for (auto& t : v) {
      if (t.src == src) {
        t.coef += c;
        return;
      }
    }
    v.push_back({src, c});
  }

  Equation compile(const IndexKey& key) const {
    Equation eq;
    const int k = key.k;
    const auto& j = key.j;

    // sum_{i=1}^{k} alpha^(j_i)(0) [L, Q_{k-1}^(D(j,i))]
    for (int i = 1; i <= k; ++i) {
      std::vector<int> reduced;
      for (int p = 0; p <= k; ++p)
        if (p != i) reduced.push_back(j[p]);
      if (auto r = resolve(make_key(reduced))) add(eq.commutator_l, r->first, alpha_d0(j[i]) * r->second);
    }
    // sum_{i=0}^{k} Q_k^(j + e_i)
    for (int i = 0; i <= k; ++i) {
      auto raised = j;
      ++raised[i];
      if (auto r = resolve(make_key(raised))) add(eq.self, r->first, r->second);
    }
    // - L^dag Q_{k+1}^(0, j)
    {
      std::vector<int> prepended{0};
      prepended.insert(prepended.end(), j.begin(), j.end());
      if (auto r = resolve(make_key(prepended))) add(eq.upper, r->first, -r->second);
    }
    if (k == 0) eq.source = alpha_d0(j[0]);

    // - sum_i sum_{c_i} [L^dag Q_i^(0, c_i), Q_{k-i}^(j_0, cbar_i)]
    const std::vector<int> tail(j.begin() + 1, j.end());
    for (int i = 0; i <= k; ++i) {
      for (const auto& split : subset_terms(tail, i)) {
        std::vector<int> left{0};
        left.insert(left.end(), split.chosen.begin(), split.chosen.end());
        std::vector<int> right{j[0]};
        right.insert(right.end(), split.rest.begin(), split.rest.end());
        auto rl = resolve(make_key(left));
        auto rr = resolve(make_key(right));
        if (!rl || !rr) continue;
        const Complex c = -rl->second * rr->second;
        bool merged = false;
        for (auto& b : eq.nonlinear) {
          if (b.left == rl->first && b.right == rr->first) {
            b.coef += c;
            merged = true;
            break;
          }
        }
        if (!merged) eq.nonlinear.push_back({rl->first, rr->first, c});
      }
    }
    return eq;
  }

  int order_;
  Closure closure_;
  KeyStorage storage_;
  std::vector<IndexKey> keys_;
  std::map<IndexKey, std::size_t> index_;
  std::vector<Complex> alpha_deriv0_;
  std::vector<Equation> equations_;
};

template <int D>
class GeneralHierarchy {
 public:
  GeneralHierarchy(const SystemMatrices<D>& sys, std::shared_ptr<const GeneralPlan> plan)
      : plan_(std::move(plan)), l_(sys.lindblad), ldag_(sys.lindblad_dag), minus_i_h_(sys.minus_i_h) {
    const auto d = sys.dim;
    a_.assign(plan_->keys().size(), zero_matrix<D>(d));
    k_ = zero_matrix<D>(d);
    tmp_ = k_;
    o_index_ = plan_->index_of(make_key({0}));
  }

  GeneralHierarchy(const SystemMatrices<D>& sys, const CorrelationKernel& kernel, int order, Closure closure,
                   KeyStorage storage = KeyStorage::canonical)
      : GeneralHierarchy(sys, std::make_shared<const GeneralPlan>(kernel, order, closure, storage)) {}

  std::size_t size() const { return plan_->keys().size(); }
  const GeneralPlan& plan() const noexcept { return *plan_; }

  const Mat<D>& o_bar(std::span<const Mat<D>> q) { return q[o_index_]; }

  /// Store index of Q_k^(0,...,0).
  std::size_t level_index(int k) const { return plan_->index_of(make_key(std::vector<int>(k + 1, 0))); }

  void rhs(double, Complex z, std::span<const Mat<D>> q, std::span<Mat<D>> dq) {
    for (std::size_t i = 0; i < q.size(); ++i) a_[i].noalias() = ldag_ * q[i];
    k_ = minus_i_h_ + z * l_;
    const auto& eqs = plan_->equations();
    for (std::size_t e = 0; e < eqs.size(); ++e) {
      const auto& eq = eqs[e];
      Mat<D>& out = dq[e];
      out.noalias() = k_ * q[e];
      out.noalias() -= q[e] * k_;
      if (eq.source != Complex(0.0)) out += eq.source * l_;
      for (const auto& t : eq.self) out += t.coef * q[t.src];
      for (const auto& t : eq.upper) out += t.coef * a_[t.src];
      for (const auto& t : eq.commutator_l) {
        tmp_.noalias() = l_ * q[t.src];
        tmp_.noalias() -= q[t.src] * l_;
        out += t.coef * tmp_;
      }
      for (const auto& b : eq.nonlinear) {
        tmp_.noalias() = a_[b.left] * q[b.right];
        tmp_.noalias() -= q[b.right] * a_[b.left];
        out += b.coef * tmp_;
      }
    }
  }

 private:
  std::shared_ptr<const GeneralPlan> plan_;
  Mat<D> l_, ldag_, minus_i_h_;
  std::vector<Mat<D>> a_;
  Mat<D> k_, tmp_;
  std::size_t o_index_ = 0;
};

/// Free-function right-hand side over a key -> matrix map (allocating; tests/tools).
template <int D>
std::map<IndexKey, Mat<D>> general_rhs(const std::map<IndexKey, Mat<D>>& state, const SystemMatrices<D>& sys,
                                       const GeneralPlan& plan, Complex z_shifted) {
  std::vector<Mat<D>> q;
  for (const auto& key : plan.keys()) {
    auto it = state.find(key);
    q.push_back(it == state.end() ? zero_matrix<D>(sys.dim) : it->second);
  }
  GeneralHierarchy<D> h(sys, std::shared_ptr<const GeneralPlan>(&plan, [](const GeneralPlan*) {}));
  std::vector<Mat<D>> dq(q.size(), zero_matrix<D>(sys.dim));
  h.rhs(0.0, z_shifted, std::span<const Mat<D>>(q), std::span<Mat<D>>(dq));
  std::map<IndexKey, Mat<D>> out;
  for (std::size_t i = 0; i < plan.keys().size(); ++i) out.emplace(plan.keys()[i], dq[i]);
  return out;
}

struct GeneralTrajectoryOptions {
  int order = 6;
  Closure closure{};
  KeyStorage storage = KeyStorage::canonical;
  PropagationOptions propagation{};
};

template <int D>
TrajectoryRecord<D> propagate_general(const SystemSpec& spec, const CorrelationKernel& kernel, const NoisePath& path,
                                      const GeneralTrajectoryOptions& opts, double horizon) {
  SystemMatrices<D> sys(spec);
  GeneralHierarchy<D> h(sys, kernel, opts.order, opts.closure, opts.storage);
  TrajectoryPropagator<D, GeneralHierarchy<D>> prop(sys, kernel, std::move(h), opts.propagation);
  return record_trajectory(prop, path, step_count(horizon, opts.propagation.dt));
}

}  // namespace hfd
