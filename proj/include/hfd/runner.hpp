// Mode dispatch and result files for the command-line tool.
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <string>

#include <Eigen/Core>

#include "hfd/config.hpp"
#include "hfd/ensemble.hpp"
#include "hfd/oracles/hops.hpp"
#include "hfd/oracles/lindblad.hpp"
#include "hfd/single_path.hpp"
#include "hfd/version.hpp"

namespace hfd {

struct RunOutcome {
  int status = 0;
  std::filesystem::path dir;  // empty when nothing was written
};

struct RunnerOptions {
  bool progress = true;     // per-trajectory counter on the error stream
  bool dump_noise = false;  // write the first trajectory's noise path
  std::string command_line;
};

namespace detail {

inline std::string utc_stamp(const char* fmt) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

inline std::filesystem::path make_run_dir(const std::string& base, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(base);
  const std::string stem = utc_stamp("%Y%m%dT%H%M%SZ") + "_seed" + std::to_string(seed);
  for (int n = 0;; ++n) {
    fs::path p = fs::path(base) / (n == 0 ? stem : stem + "-" + std::to_string(n));
    if (fs::create_directory(p)) return p;
  }
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

inline void write_observables(const std::filesystem::path& p, const std::vector<double>& times,
                              const std::vector<ObservableSeries>& obs) {
  auto f = open_out(p);
  f << "t";
  for (const auto& o : obs) f << "," << o.name << "_mean," << o.name << "_stderr";
  f << "\n";
  for (std::size_t s = 0; s < times.size(); ++s) {
    f << format_double(times[s]);
    for (const auto& o : obs) f << "," << format_double(o.mean[s]) << "," << format_double(o.stderr_of_mean[s]);
    f << "\n";
  }
}

inline void write_rho(const std::filesystem::path& p, const std::vector<double>& times, const std::vector<MatX>& rho) {
  auto f = open_out(p);
  const Eigen::Index d = rho.empty() ? 0 : rho.front().rows();
  f << "t";
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) f << ",re_" << a << b << ",im_" << a << b;
  f << "\n";
  for (std::size_t s = 0; s < times.size(); ++s) {
    f << format_double(times[s]);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b)
        f << "," << format_double(rho[s](a, b).real()) << "," << format_double(rho[s](a, b).imag());
    f << "\n";
  }
}

inline void write_qnorms(const std::filesystem::path& p, const std::vector<double>& times,
                         const std::vector<std::vector<double>>& qn) {
  auto f = open_out(p);
  f << "t";
  const std::size_t n = qn.empty() ? 0 : qn.front().size();
  for (std::size_t k = 0; k < n; ++k) f << ",Q" << k;
  f << "\n";
  for (std::size_t s = 0; s < times.size(); ++s) {
    f << format_double(times[s]);
    for (double v : qn[s]) f << "," << format_double(v);
    f << "\n";
  }
}

inline void write_meta(const std::filesystem::path& p, const RunConfig& cfg, const RunnerOptions& ro,
                       const std::vector<std::string>& notes) {
  auto f = open_out(p);
  f << "# hfd " << kVersion << "\n";
  f << "# eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  f << "# compiler " << __VERSION__ << "\n";
  f << "# written " << utc_stamp("%Y-%m-%dT%H:%M:%SZ") << "\n";
  if (!ro.command_line.empty()) f << "# command " << ro.command_line << "\n";
  for (const auto& n : notes) f << "# " << n << "\n";
  f << "# the configuration below reproduces this run (parse it with --config)\n";
  f << emit_config(cfg);
}

inline Closure closure_of(const RunConfig& cfg, const CorrelationKernel& kernel) {
  const auto& r = cfg.run;
  if (r.closure == "truncate-zero") return Closure::truncate_zero();
  const int j_max = r.closure_j_max.value_or(r.order);
  if (r.closure_ratio) {
    if (!kernel.single_exponential())
      throw InvalidArgument("geometric closure requires a single-exponential kernel");
    return Closure::geometric(*r.closure_ratio, j_max);
  }
  return Closure::geometric_for(kernel, j_max);
}

inline Truncation truncation_of(const RunConfig& cfg) {
  return cfg.run.truncation == "commutator" ? Truncation::commutator : Truncation::zero;
}

}  // namespace detail

/// Executes one configured run. Returns a nonzero status on failure.
inline RunOutcome run(const RunConfig& cfg, std::ostream& out, std::ostream& err, const RunnerOptions& ro = {}) {
  using namespace detail;
  RunOutcome res;
  const auto& r = cfg.run;
  try {
    if (r.mode == "counts") {
      const auto [hfd_n, sde_n] = count_equations(r.order);
      out << "HFD: " << hfd_n << ", SDE: " << sde_n << "\n";
      return res;
    }

    const SystemSpec spec = build_system_with_observables(cfg.system);
    const CorrelationKernel kernel = build_kernel(cfg.bath);
    res.dir = make_run_dir(r.out_dir, r.seed);
    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    std::vector<std::string> notes;

    if (ro.dump_noise && kernel.samplable()) {
      const NoisePath path = sample_path(kernel, r.horizon, r.dt, trajectory_seed(r.seed, 0));
      auto f = open_out(res.dir / "noise.csv");
      f << "t,re_z,im_z\n";
      for (std::size_t i = 0; i < path.size(); ++i)
        f << format_double(path.time_of_half(i)) << "," << format_double(path.at_half(i).real()) << ","
          << format_double(path.at_half(i).imag()) << "\n";
    }

    if (r.mode == "ou-hfd" || r.mode == "general-hfd" || r.mode == "sde-oracle" || r.mode == "exact3") {
      EnsembleOptions eo;
      eo.engine = parse_engine(r.mode);
      eo.trajectories = r.trajectories;
      eo.order = r.mode == "exact3" ? 1 : r.order;
      eo.truncation = truncation_of(cfg);
      if (eo.engine == Engine::general_hfd) eo.closure = closure_of(cfg, kernel);
      eo.dt = r.dt;
      eo.horizon = r.horizon;
      eo.master_seed = r.seed;
      eo.workers = r.workers;
      eo.sample_every = r.sample_every;
      std::mutex mu;
      if (ro.progress) {
        eo.progress = [&](std::size_t done, std::size_t total) {
          std::lock_guard lock(mu);
          err << "\rtrajectory " << done << "/" << total << (done == total ? "\n" : "") << std::flush;
        };
      }
      const EnsembleResult e = run_ensemble(spec, kernel, eo);
      write_observables(res.dir / "observables.csv", e.times, e.observables);
      write_qnorms(res.dir / "qnorms.csv", e.times, e.qnorms);
      write_rho(res.dir / "rho.csv", e.times, e.rho);
      const auto term = termination_report(e);
      const auto& dg = e.diagnostics;
      notes.push_back("engine " + e.meta.engine + ", truncation " + e.meta.truncation);
      notes.push_back("termination " + term.describe());
      notes.push_back("density max|Tr-1| " + format_double(dg.max_trace_error) + ", max|rho-rho^dag| " +
                      format_double(dg.max_hermiticity_error) + ", min eigenvalue " + format_double(dg.min_eigenvalue));
      notes.push_back("wall_seconds " + format_double(e.meta.wall_seconds));
      out << "termination: " << term.describe() << "\n";
      out << "density check: " << (dg.ok() ? "ok" : "FAILED") << " (" << notes[2].substr(8) << ")\n";
      if (!dg.ok()) res.status = 3;
    } else if (r.mode == "lindblad") {
      const double rate = markov_rate(kernel);
      const auto series = oracles::lindblad_oracle(spec, rate, r.dt, r.horizon);
      std::vector<double> times;
      std::vector<MatX> rho;
      std::vector<ObservableSeries> obs(spec.observables.size());
      for (std::size_t o = 0; o < obs.size(); ++o) obs[o].name = spec.observables[o].name;
      for (std::size_t s = 0; s < series.times.size(); s += r.sample_every) {
        times.push_back(series.times[s]);
        rho.push_back(series.rho[s]);
        for (std::size_t o = 0; o < obs.size(); ++o) {
          obs[o].mean.push_back(std::real((series.rho[s] * spec.observables[o].matrix).trace()));
          obs[o].stderr_of_mean.push_back(0.0);
        }
      }
      write_observables(res.dir / "observables.csv", times, obs);
      write_rho(res.dir / "rho.csv", times, rho);
      notes.push_back("lindblad rate " + format_double(rate));
      notes.push_back("wall_seconds " + format_double(wall()));
      out << "lindblad rate " << format_double(rate) << "\n";
    } else if (r.mode == "hops-check") {
      const NoisePath path = sample_path(kernel, r.horizon, r.dt, trajectory_seed(r.seed, 0));
      PathOptions po;
      po.engine = Engine::ou_hfd;
      po.order = r.order;
      po.truncation = truncation_of(cfg);
      po.propagation.dt = r.dt;
      po.sample_every = r.sample_every;
      const PathRecord rec = run_path(spec, kernel, path, r.horizon, po);
      auto f = open_out(res.dir / "report.csv");
      f << "t,reconstruction_residual,two_operator_deviation\n";
      double max_res = 0.0, max_two = 0.0;
      for (std::size_t s = 0; s < rec.times.size(); ++s) {
        const auto a = oracles::hops_states<Eigen::Dynamic>(rec.q[s], rec.psi[s], r.order);
        const auto b = oracles::hops_states_expanded<Eigen::Dynamic>(rec.q[s], rec.psi[s], r.order);
        std::vector<MatX> two(rec.q[s].size(), MatX::Zero(spec.dim, spec.dim));
        for (std::size_t k = 0; k < std::min<std::size_t>(2, two.size()); ++k) two[k] = rec.q[s][k];
        const auto c = oracles::hops_states<Eigen::Dynamic>(two, rec.psi[s], r.order);
        double res_k = 0.0, two_k = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
          const double scale = std::max(1.0, a[k].norm());
          res_k = std::max(res_k, (a[k] - b[k]).norm() / scale);
          two_k = std::max(two_k, (a[k] - c[k]).norm() / scale);
        }
        max_res = std::max(max_res, res_k);
        max_two = std::max(max_two, two_k);
        f << format_double(rec.times[s]) << "," << format_double(res_k) << "," << format_double(two_k) << "\n";
      }
      notes.push_back("max reconstruction residual " + format_double(max_res));
      notes.push_back("max two-operator deviation " + format_double(max_two));
      notes.push_back("wall_seconds " + format_double(wall()));
      out << "max reconstruction residual " << format_double(max_res) << "\n";
      out << "max deviation using only Q_0, Q_1 " << format_double(max_two) << "\n";
    } else if (r.mode == "compare") {
      const NoisePath path = sample_path(kernel, r.horizon, r.dt, trajectory_seed(r.seed, 0));
      auto options_for = [&](const std::string& name) {
        PathOptions po;
        po.engine = parse_engine(name);
        po.order = po.engine == Engine::exact3 ? 1 : r.order;
        po.truncation = truncation_of(cfg);
        if (po.engine == Engine::general_hfd) po.closure = closure_of(cfg, kernel);
        po.propagation.dt = r.dt;
        po.sample_every = r.sample_every;
        return po;
      };
      const PathRecord a = run_path(spec, kernel, path, r.horizon, options_for(r.compare_a));
      const PathRecord b = run_path(spec, kernel, path, r.horizon, options_for(r.compare_b));
      const std::size_t levels = std::max(a.q.front().size(), b.q.front().size());
      auto f = open_out(res.dir / "report.csv");
      f << "t,overlap_deficit";
      for (const auto& o : spec.observables) f << ",d_" << o.name;
      for (std::size_t k = 0; k < levels; ++k) f << ",dQ" << k;
      f << "\n";
      double max_def = 0.0, max_obs = 0.0;
      std::vector<double> max_q(levels, 0.0);
      for (std::size_t s = 0; s < a.times.size(); ++s) {
        const double def = overlap_deficit(a.psi[s], b.psi[s]);
        max_def = std::max(max_def, def);
        f << format_double(a.times[s]) << "," << format_double(def);
        for (const auto& o : spec.observables) {
          const VecX pa = a.psi[s].normalized(), pb = b.psi[s].normalized();
          const double d = std::abs(std::real(pa.dot(o.matrix * pa)) - std::real(pb.dot(o.matrix * pb)));
          max_obs = std::max(max_obs, d);
          f << "," << format_double(d);
        }
        for (std::size_t k = 0; k < levels; ++k) {
          const double d = level_deviation(a.q[s], b.q[s], k);
          max_q[k] = std::max(max_q[k], d);
          f << "," << format_double(d);
        }
        f << "\n";
      }
      notes.push_back("compare " + r.compare_a + " vs " + r.compare_b);
      notes.push_back("max overlap deficit " + format_double(max_def) + ", max observable deviation " +
                      format_double(max_obs));
      notes.push_back("wall_seconds " + format_double(wall()));
      out << r.compare_a << " vs " << r.compare_b << ": max overlap deficit " << format_double(max_def)
          << ", max observable deviation " << format_double(max_obs) << "\n";
      for (std::size_t k = 0; k < levels; ++k) out << "  max |dQ_" << k << "| " << format_double(max_q[k]) << "\n";
    } else {
      throw InvalidArgument("unknown mode '" + r.mode + "'");
    }
    write_meta(res.dir / "meta.txt", cfg, ro, notes);
    out << "results in " << res.dir.string() << "\n";
  } catch (const EnsembleError& e) {
    err << "error: " << e.what() << "\n";
    res.status = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    res.status = 1;
  }
  return res;
}

}  // namespace hfd
