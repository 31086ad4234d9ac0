// Monte Carlo driver: independent trajectories averaged into a reduced density
// matrix, observable means with standard errors, and mean trace norms of Q_k.
//
// Trajectories are grouped into fixed blocks of kBlockSize by index. A block
// is summed sequentially by whichever worker takes it, and blocks are merged
// along a fixed binary tree over block indices, so the floating-point result
// does not depend on the number of workers or on scheduling.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hfd/hfd_general.hpp"
#include "hfd/hfd_ou.hpp"
#include "hfd/linalg.hpp"
#include "hfd/oracles/exact_three_level.hpp"
#include "hfd/oracles/sde.hpp"

namespace hfd {

enum class Engine { ou_hfd, general_hfd, sde_oracle, exact3 };

inline std::string to_string(Engine e) {
  switch (e) {
    case Engine::ou_hfd: return "ou-hfd";
    case Engine::general_hfd: return "general-hfd";
    case Engine::sde_oracle: return "sde-oracle";
    case Engine::exact3: return "exact3";
  }
  return "?";
}

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

struct EnsembleOptions {
  Engine engine = Engine::ou_hfd;
  std::size_t trajectories = 1;
  int order = 10;
  Truncation truncation = Truncation::zero;  // ou-hfd
  Closure closure{};                         // general-hfd
  double dt = 0.01;
  double horizon = 1.0;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  std::size_t sample_every = 1;  // keep every n-th integrator step
  ProgressCallback progress{};   // called from worker threads
};

struct ObservableSeries {
  std::string name;
  std::vector<double> mean;
  std::vector<double> stderr_of_mean;
};

struct EnsembleMeta {
  std::size_t trajectories = 0;
  std::uint64_t master_seed = 0;
  int order = 0;
  double dt = 0.0;
  double horizon = 0.0;
  std::size_t sample_every = 1;
  std::string engine;
  std::string truncation;
  unsigned workers = 1;
  double wall_seconds = 0.0;
};

struct DensityDiagnostics {
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  double max_observable_consistency_error = 0.0;  // |mean - Tr(rho A)|

  static constexpr double kTraceTolerance = 1e-10;
  static constexpr double kHermiticityTolerance = 1e-10;
  static constexpr double kPositivitySlack = -1e-6;

  bool ok() const {
    return max_trace_error <= kTraceTolerance && max_hermiticity_error <= kHermiticityTolerance &&
           min_eigenvalue >= kPositivitySlack;
  }
};

struct EnsembleResult {
  std::vector<double> times;
  std::vector<MatX> rho;
  std::vector<ObservableSeries> observables;
  std::vector<std::vector<double>> qnorms;  // [sample][k], ensemble-mean trace norm of Q_k
  EnsembleMeta meta;
  DensityDiagnostics diagnostics;
};

struct TrajectoryFailure {
  std::size_t index;
  std::uint64_t seed;
  double time;
  std::string message;
};

class EnsembleError : public std::runtime_error {
 public:
  EnsembleError(std::vector<TrajectoryFailure> failures)
      : std::runtime_error(describe(failures)), failures_(std::move(failures)) {}
  const std::vector<TrajectoryFailure>& failures() const noexcept { return failures_; }

 private:
  static std::string describe(const std::vector<TrajectoryFailure>& f) {
    std::string s = std::to_string(f.size()) + " trajectory(ies) failed; seeds:";
    for (const auto& x : f) s += " " + std::to_string(x.seed);
    if (!f.empty()) s += " (first: " + f.front().message + ")";
    return s;
  }
  std::vector<TrajectoryFailure> failures_;
};

inline constexpr std::size_t kBlockSize = 16;

/// (HFD operator count, SDE operator count) at order N.
inline std::pair<std::size_t, std::size_t> count_equations(int order) {
  if (order < 0) throw InvalidArgument("count_equations: order must be >= 0");
  const auto n = static_cast<std::size_t>(order);
  return {n + 1, (n + 1) * (n + 2) / 2};
}

struct TerminationReport {
  std::optional<int> n_c;  // empty: no termination up to the order
  bool trivial_bath = false;
  std::vector<double> max_norms;

  std::string describe() const {
    if (trivial_bath) return "N_c = 0 (trivial bath: all norms zero)";
    if (!n_c) return "no termination <= " + std::to_string(static_cast<int>(max_norms.size()) - 1);
    return "N_c = " + std::to_string(*n_c);
  }
};

inline TerminationReport termination_report(const EnsembleResult& result, double tol = 1e-6) {
  if (result.qnorms.empty()) throw InvalidArgument("termination_report: no qnorms recorded");
  TerminationReport rep;
  rep.max_norms.assign(result.qnorms.front().size(), 0.0);
  for (const auto& row : result.qnorms)
    for (std::size_t k = 0; k < row.size(); ++k) rep.max_norms[k] = std::max(rep.max_norms[k], row[k]);
  if (rep.max_norms.empty() || rep.max_norms[0] == 0.0) {
    rep.n_c = 0;
    rep.trivial_bath = true;
    return rep;
  }
  const int nc = natural_termination(rep.max_norms, tol);
  if (nc >= 0) rep.n_c = nc;
  return rep;
}

namespace detail {

// Flat per-sample sums; merged elementwise, left operand first.
struct Partial {
  std::vector<Complex> rho;  // samples * d * d
  std::vector<double> obs;   // samples * n_obs
  std::vector<double> obs_sq;
  std::vector<double> qnorm;  // samples * n_q

  Partial(std::size_t samples, std::size_t d2, std::size_t n_obs, std::size_t n_q)
      : rho(samples * d2, Complex(0.0)), obs(samples * n_obs, 0.0), obs_sq(samples * n_obs, 0.0), qnorm(samples * n_q, 0.0) {}

  void merge(const Partial& right) {
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += right.rho[i];
    for (std::size_t i = 0; i < obs.size(); ++i) obs[i] += right.obs[i];
    for (std::size_t i = 0; i < obs_sq.size(); ++i) obs_sq[i] += right.obs_sq[i];
    for (std::size_t i = 0; i < qnorm.size(); ++i) qnorm[i] += right.qnorm[i];
  }
};

// Binary-tree reduction over block indices; node (L, p) is the sum of
// nodes (L-1, 2p) and (L-1, 2p+1), or just (L-1, 2p) when 2p+1 is past the end.
class TreeReducer {
 public:
  explicit TreeReducer(std::size_t leaves) {
    for (std::size_t n = leaves; ; n = (n + 1) / 2) {
      counts_.push_back(n);
      if (n <= 1) break;
    }
  }

  void insert(std::size_t index, std::unique_ptr<Partial> node) { settle(0, index, std::move(node)); }

  std::unique_ptr<Partial> finish() {
    for (std::size_t level = 0; level + 1 < counts_.size(); ++level) {
      const std::size_t n = counts_[level];
      if (n % 2 == 1) {
        std::unique_ptr<Partial> lone;
        {
          std::lock_guard lock(mu_);
          auto it = nodes_.find({level, n - 1});
          if (it == nodes_.end()) continue;
          lone = std::move(it->second);
          nodes_.erase(it);
        }
        settle(level + 1, (n - 1) / 2, std::move(lone));
      }
    }
    std::lock_guard lock(mu_);
    auto it = nodes_.find({counts_.size() - 1, 0});
    if (it == nodes_.end()) throw std::logic_error("TreeReducer: missing root");
    return std::move(it->second);
  }

 private:
  void settle(std::size_t level, std::size_t index, std::unique_ptr<Partial> node) {
    while (level + 1 < counts_.size()) {
      const std::size_t sibling = index ^ 1U;
      if (sibling >= counts_[level]) break;  // lone node, promoted in finish()
      std::unique_ptr<Partial> other;
      {
        std::lock_guard lock(mu_);
        auto it = nodes_.find({level, sibling});
        if (it == nodes_.end()) {
          nodes_.emplace(std::make_pair(level, index), std::move(node));
          return;
        }
        other = std::move(it->second);
        nodes_.erase(it);
      }
      if (index < sibling) {
        node->merge(*other);
      } else {
        other->merge(*node);
        node = std::move(other);
      }
      ++level;
      index /= 2;
    }
    std::lock_guard lock(mu_);
    nodes_.emplace(std::make_pair(level, index), std::move(node));
  }

  std::vector<std::size_t> counts_;
  std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<Partial>> nodes_;
  std::mutex mu_;
};

template <int D>
class TrajectoryRunner {
 public:
  TrajectoryRunner(const SystemSpec& spec, const CorrelationKernel& kernel, const EnsembleOptions& opts,
                   std::shared_ptr<const GeneralPlan> plan)
      : spec_(spec), kernel_(kernel), opts_(opts), sys_(spec), plan_(std::move(plan)) {
    steps_ = step_count(opts.horizon, opts.dt);
    for (const auto& o : spec.observables) obs_.push_back(o.matrix);
  }

  std::size_t steps() const { return steps_; }

  /// Runs trajectory `seed` and adds its samples into `acc`.
  void run(std::uint64_t seed, Partial& acc) {
    const NoisePath path = sample_path(kernel_, static_cast<double>(steps_) * opts_.dt, opts_.dt, seed);
    PropagationOptions p;
    p.dt = opts_.dt;
    switch (opts_.engine) {
      case Engine::ou_hfd: {
        OUHierarchy<D> h(sys_, kernel_, opts_.order, opts_.truncation);
        TrajectoryPropagator<D, OUHierarchy<D>> prop(sys_, kernel_, std::move(h), p);
        drive(prop, path, acc, [](auto&, std::span<const Mat<D>> q, std::size_t k) { return trace_norm(q[k]); });
        break;
      }
      case Engine::general_hfd: {
        GeneralHierarchy<D> h(sys_, plan_);
        std::vector<std::size_t> idx;
        for (int k = 0; k <= opts_.order; ++k) idx.push_back(h.level_index(k));
        TrajectoryPropagator<D, GeneralHierarchy<D>> prop(sys_, kernel_, std::move(h), p);
        drive(prop, path, acc, [&](auto&, std::span<const Mat<D>> q, std::size_t k) { return trace_norm(q[idx[k]]); });
        break;
      }
      case Engine::sde_oracle: {
        oracles::SdeHierarchy<D> h(sys_, kernel_, opts_.order);
        TrajectoryPropagator<D, oracles::SdeHierarchy<D>> prop(sys_, kernel_, std::move(h), p);
        drive(prop, path, acc, [](auto& pr, std::span<const Mat<D>> q, std::size_t k) {
          return trace_norm(pr.hierarchy().grouped(q, static_cast<int>(k)));
        });
        break;
      }
      case Engine::exact3: {
        if constexpr (D == 3) {
          const auto& t = kernel_.terms()[0];
          oracles::ExactThreeLevel h(2.0 * t.weight.real() / t.rate.real(), t.rate.real());
          h.set_hamiltonian(sys_.hamiltonian);
          TrajectoryPropagator<3, oracles::ExactThreeLevel> prop(sys_, kernel_, h, p);
          drive(prop, path, acc, [](auto&, std::span<const Mat<3>> q, std::size_t k) {
            return k < 2 ? trace_norm(q[k]) : 0.0;
          });
        } else {
          throw InvalidArgument("exact3 engine requires the three-level model");
        }
        break;
      }
    }
  }

  std::size_t n_q() const { return static_cast<std::size_t>(opts_.order) + 1; }

 private:
  template <class Prop, class NormFn>
  void drive(Prop& prop, const NoisePath& path, Partial& acc, NormFn norm_of) {
    const std::size_t d = static_cast<std::size_t>(sys_.dim);
    const std::size_t n_obs = obs_.size();
    const std::size_t n_q = this->n_q();
    prop.run(path, steps_, [&](const StepView<D>& s) {
      if (s.step % opts_.sample_every != 0) return;
      const std::size_t row = s.step / opts_.sample_every;
      const Vec<D> psi = s.psi / s.psi.norm();
      Complex* r = acc.rho.data() + row * d * d;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) r[a * d + b] += psi(a) * std::conj(psi(b));
      for (std::size_t o = 0; o < n_obs; ++o) {
        const double v = std::real(psi.dot(obs_[o] * psi));
        acc.obs[row * n_obs + o] += v;
        acc.obs_sq[row * n_obs + o] += v * v;
      }
      for (std::size_t k = 0; k < n_q; ++k) acc.qnorm[row * n_q + k] += norm_of(prop, s.q, k);
    });
  }

  const SystemSpec& spec_;
  const CorrelationKernel& kernel_;
  const EnsembleOptions& opts_;
  SystemMatrices<D> sys_;
  std::shared_ptr<const GeneralPlan> plan_;
  std::vector<Mat<D>> obs_;
  std::size_t steps_ = 0;
};

inline void check_exact3_model(const SystemSpec& spec, const CorrelationKernel& kernel) {
  if (spec.dim != 3) throw InvalidArgument("exact3 engine requires the three-level model (dim 3)");
  const MatX jm = angular_momentum(2).jminus;
  if ((spec.lindblad - jm).norm() > 1e-12) throw InvalidArgument("exact3 engine requires L = J_-");
  const MatX& h = spec.hamiltonian;
  const MatX off = h - MatX(h.diagonal().asDiagonal());
  const double w = h(0, 0).real();
  if (off.norm() > 1e-12 || std::abs(h(1, 1)) > 1e-12 || std::abs(h(2, 2) + w) > 1e-12)
    throw InvalidArgument("exact3 engine requires H = omega J_z");
  if (!kernel.single_exponential() || !kernel.samplable())
    throw InvalidArgument("exact3 engine requires an Ornstein-Uhlenbeck kernel");
}

template <int D>
EnsembleResult run_ensemble_impl(const SystemSpec& spec, const CorrelationKernel& kernel, const EnsembleOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  std::shared_ptr<const GeneralPlan> plan;
  if (opts.engine == Engine::general_hfd) plan = std::make_shared<const GeneralPlan>(kernel, opts.order, opts.closure);
  if (opts.engine == Engine::exact3) check_exact3_model(spec, kernel);

  const std::size_t d = static_cast<std::size_t>(spec.dim);
  const std::size_t steps = step_count(opts.horizon, opts.dt);
  const std::size_t samples = steps / opts.sample_every + 1;
  const std::size_t n_obs = spec.observables.size();
  const std::size_t n_q = static_cast<std::size_t>(opts.order) + 1;
  const std::size_t m = opts.trajectories;
  const std::size_t blocks = (m + kBlockSize - 1) / kBlockSize;

  TreeReducer reducer(blocks);
  std::atomic<std::size_t> next_block{0};
  std::atomic<std::size_t> done{0};
  std::mutex fail_mu;
  std::vector<TrajectoryFailure> failures;
  std::exception_ptr fatal;

  auto worker = [&] {
    try {
      TrajectoryRunner<D> runner(spec, kernel, opts, plan);
      for (std::size_t b = next_block++; b < blocks; b = next_block++) {
        auto acc = std::make_unique<Partial>(samples, d * d, n_obs, n_q);
        for (std::size_t i = b * kBlockSize; i < std::min(m, (b + 1) * kBlockSize); ++i) {
          const std::uint64_t seed = trajectory_seed(opts.master_seed, i);
          try {
            runner.run(seed, *acc);
          } catch (const PropagationError& e) {
            std::lock_guard lock(fail_mu);
            failures.push_back({i, seed, e.time(), e.what()});
          }
          const std::size_t n = ++done;
          if (opts.progress) opts.progress(n, m);
        }
        reducer.insert(b, std::move(acc));
      }
    } catch (...) {
      std::lock_guard lock(fail_mu);
      if (!fatal) fatal = std::current_exception();
      next_block = blocks;
    }
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(opts.workers, static_cast<unsigned>(blocks)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    throw EnsembleError(std::move(failures));
  }
  const auto total = reducer.finish();

  EnsembleResult res;
  const double inv_m = 1.0 / static_cast<double>(m);
  res.observables.resize(n_obs);
  for (std::size_t o = 0; o < n_obs; ++o) res.observables[o].name = spec.observables[o].name;
  DensityDiagnostics& diag = res.diagnostics;
  diag.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    res.times.push_back(static_cast<double>(s * opts.sample_every) * opts.dt);
    MatX rho(spec.dim, spec.dim);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) rho(a, b) = total->rho[s * d * d + a * d + b] * inv_m;
    diag.max_trace_error = std::max(diag.max_trace_error, std::abs(rho.trace() - Complex(1.0)));
    diag.max_hermiticity_error = std::max(diag.max_hermiticity_error, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
    const MatX herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<MatX> es(herm, Eigen::EigenvaluesOnly);
    diag.min_eigenvalue = std::min(diag.min_eigenvalue, es.eigenvalues().minCoeff());
    for (std::size_t o = 0; o < n_obs; ++o) {
      const double sum = total->obs[s * n_obs + o];
      const double mean = sum * inv_m;
      double se = 0.0;
      if (m > 1) {
        const double var = std::max(0.0, (total->obs_sq[s * n_obs + o] - sum * mean) / static_cast<double>(m - 1));
        se = std::sqrt(var * inv_m);
      }
      res.observables[o].mean.push_back(mean);
      res.observables[o].stderr_of_mean.push_back(se);
      const double tr = std::real((rho * spec.observables[o].matrix).trace());
      diag.max_observable_consistency_error = std::max(diag.max_observable_consistency_error, std::abs(mean - tr));
    }
    std::vector<double> qn(n_q);
    for (std::size_t k = 0; k < n_q; ++k) qn[k] = total->qnorm[s * n_q + k] * inv_m;
    res.qnorms.push_back(std::move(qn));
    res.rho.push_back(std::move(rho));
  }

  res.meta.trajectories = m;
  res.meta.master_seed = opts.master_seed;
  res.meta.order = opts.order;
  res.meta.dt = opts.dt;
  res.meta.horizon = opts.horizon;
  res.meta.sample_every = opts.sample_every;
  res.meta.engine = to_string(opts.engine);
  res.meta.truncation = opts.engine == Engine::ou_hfd ? to_string(opts.truncation)
                        : opts.engine == Engine::general_hfd
                            ? (opts.closure.kind == Closure::Kind::geometric ? "geometric" : "truncate-zero")
                            : "none";
  res.meta.workers = opts.workers;
  res.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

}  // namespace detail

inline EnsembleResult run_ensemble(const SystemSpec& spec, const CorrelationKernel& kernel, const EnsembleOptions& opts) {
  if (opts.trajectories < 1) throw InvalidArgument("run_ensemble: need at least one trajectory");
  if (opts.sample_every < 1) throw InvalidArgument("run_ensemble: sample_every must be >= 1");
  if (opts.order < 0) throw InvalidArgument("run_ensemble: order must be >= 0");
  if (!kernel.samplable()) throw InvalidArgument("run_ensemble: kernel cannot be sampled as a noise process");
  const auto report = validate_system(spec);
  if (!report.ok()) throw InvalidArgument("run_ensemble: invalid system: " + report.summary());
  return dispatch_dimension(spec.dim, [&]<int D>(DimTag<D>) { return detail::run_ensemble_impl<D>(spec, kernel, opts); });
}

}  // namespace hfd
