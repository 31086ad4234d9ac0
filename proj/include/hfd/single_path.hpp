// One trajectory of any engine on a given noise path, in a dimension-free form.
// Q_k is reported per level: the OU operators, Q_k^(0...0) of the general
// engine, or the grouped noise-order sum for the SDE oracle.
#pragma once

#include <string>
#include <vector>

#include "hfd/ensemble.hpp"

namespace hfd {

struct PathRecord {
  std::vector<double> times;
  std::vector<VecX> psi;
  std::vector<std::vector<MatX>> q;  // [sample][k]
};

struct PathOptions {
  Engine engine = Engine::ou_hfd;
  int order = 10;
  Truncation truncation = Truncation::zero;
  Closure closure{};
  PropagationOptions propagation{};
  std::size_t sample_every = 1;
};

inline Engine parse_engine(const std::string& s) {
  if (s == "ou-hfd") return Engine::ou_hfd;
  if (s == "general-hfd") return Engine::general_hfd;
  if (s == "sde-oracle") return Engine::sde_oracle;
  if (s == "exact3") return Engine::exact3;
  throw InvalidArgument("unknown engine '" + s + "'");
}

namespace detail {

template <int D, class Prop, class Levels>
PathRecord record_path(Prop& prop, const NoisePath& path, std::size_t steps, std::size_t every, Levels levels) {
  PathRecord rec;
  prop.run(path, steps, [&](const StepView<D>& s) {
    if (s.step % every != 0) return;
    rec.times.push_back(s.time);
    rec.psi.emplace_back(VecX(s.psi));
    rec.q.push_back(levels(prop, s.q));
  });
  return rec;
}

template <int D>
PathRecord run_path_impl(const SystemSpec& spec, const CorrelationKernel& kernel, const NoisePath& path, double horizon,
                         const PathOptions& o) {
  SystemMatrices<D> sys(spec);
  const std::size_t steps = step_count(horizon, o.propagation.dt);
  const int n = o.order;
  switch (o.engine) {
    case Engine::ou_hfd: {
      TrajectoryPropagator<D, OUHierarchy<D>> prop(sys, kernel, OUHierarchy<D>(sys, kernel, n, o.truncation),
                                                   o.propagation);
      return record_path<D>(prop, path, steps, o.sample_every, [](auto&, std::span<const Mat<D>> q) {
        return std::vector<MatX>(q.begin(), q.end());
      });
    }
    case Engine::general_hfd: {
      GeneralHierarchy<D> h(sys, kernel, n, o.closure);
      std::vector<std::size_t> idx;
      for (int k = 0; k <= n; ++k) idx.push_back(h.level_index(k));
      TrajectoryPropagator<D, GeneralHierarchy<D>> prop(sys, kernel, std::move(h), o.propagation);
      return record_path<D>(prop, path, steps, o.sample_every, [&](auto&, std::span<const Mat<D>> q) {
        std::vector<MatX> out;
        for (auto i : idx) out.emplace_back(q[i]);
        return out;
      });
    }
    case Engine::sde_oracle: {
      TrajectoryPropagator<D, oracles::SdeHierarchy<D>> prop(sys, kernel, oracles::SdeHierarchy<D>(sys, kernel, n),
                                                             o.propagation);
      return record_path<D>(prop, path, steps, o.sample_every, [n](auto& pr, std::span<const Mat<D>> q) {
        std::vector<MatX> out;
        for (int k = 0; k <= n; ++k) out.emplace_back(pr.hierarchy().grouped(q, k));
        return out;
      });
    }
    case Engine::exact3: {
      if constexpr (D == 3) {
        check_exact3_model(spec, kernel);
        const auto& t = kernel.terms()[0];
        oracles::ExactThreeLevel h(2.0 * t.weight.real() / t.rate.real(), t.rate.real());
        h.set_hamiltonian(sys.hamiltonian);
        TrajectoryPropagator<3, oracles::ExactThreeLevel> prop(sys, kernel, h, o.propagation);
        return record_path<3>(prop, path, steps, o.sample_every, [](auto&, std::span<const Mat<3>> q) {
          return std::vector<MatX>(q.begin(), q.end());
        });
      } else {
        throw InvalidArgument("exact3 engine requires the three-level model");
      }
    }
  }
  throw InvalidArgument("run_path: unknown engine");
}

}  // namespace detail

inline PathRecord run_path(const SystemSpec& spec, const CorrelationKernel& kernel, const NoisePath& path,
                           double horizon, const PathOptions& opts) {
  return dispatch_dimension(spec.dim, [&]<int D>(DimTag<D>) {
    return detail::run_path_impl<D>(spec, kernel, path, horizon, opts);
  });
}

/// 1 - |<a|b>|^2 for unit vectors.
inline double overlap_deficit(const VecX& a, const VecX& b) {
  return 1.0 - std::norm(a.normalized().dot(b.normalized()));
}

/// Largest entry modulus of a - b, with a missing level read as zero.
inline double level_deviation(const std::vector<MatX>& a, const std::vector<MatX>& b, std::size_t k) {
  if (k < a.size() && k < b.size()) return (a[k] - b[k]).cwiseAbs().maxCoeff();
  if (k < a.size()) return a[k].cwiseAbs().maxCoeff();
  if (k < b.size()) return b[k].cwiseAbs().maxCoeff();
  return 0.0;
}

}  // namespace hfd
