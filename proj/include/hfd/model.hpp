// System description: Hamiltonian, coupling operator, initial state, observables.
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hfd/types.hpp"

namespace hfd {

struct NamedObservable {
  std::string name;
  MatX matrix;
};

/// Immutable once built; shared read-only by all trajectory workers.
struct SystemSpec {
  Eigen::Index dim = 0;
  MatX hamiltonian;
  MatX lindblad;
  VecX initial_state;
  std::vector<NamedObservable> observables;
};

struct SpinMatrices {
  MatX jx, jy, jz, jminus;
};

/// Spin-(two_j/2) matrices in the J_z eigenbasis, ordered m = j, j-1, ..., -j.
inline SpinMatrices angular_momentum(int two_j) {
  if (two_j < 0) throw InvalidArgument("angular_momentum: two_j must be >= 0");
  const Eigen::Index d = two_j + 1;
  const double j = 0.5 * two_j;
  SpinMatrices s;
  s.jz = MatX::Zero(d, d);
  MatX jplus = MatX::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    const double m = j - static_cast<double>(a);
    s.jz(a, a) = m;
    if (a > 0) jplus(a - 1, a) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  s.jminus = jplus.adjoint();
  s.jx = 0.5 * (jplus + s.jminus);
  s.jy = (jplus - s.jminus) / Complex(0.0, 2.0);
  return s;
}

namespace pauli {
inline MatX x() { return (MatX(2, 2) << 0, 1, 1, 0).finished(); }
inline MatX y() { return (MatX(2, 2) << 0, -kI, kI, 0).finished(); }
inline MatX z() { return (MatX(2, 2) << 1, 0, 0, -1).finished(); }
/// |down><up| in the (up, down) basis.
inline MatX minus() { return (MatX(2, 2) << 0, 0, 1, 0).finished(); }
}  // namespace pauli

inline constexpr double kHermiticityTolerance = 1e-12;
inline constexpr double kNormTolerance = 1e-12;

inline double hermiticity_deviation(const MatX& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double deviation = 0.0;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool lindblad_self_adjoint = false;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  std::vector<ValidationCheck> failures() const {
    std::vector<ValidationCheck> out;
    for (const auto& c : checks)
      if (!c.passed) out.push_back(c);
    return out;
  }

  std::string summary() const {
    std::string s;
    for (const auto& c : checks) {
      s += (c.passed ? "ok   " : "FAIL ") + c.name + " (deviation " + std::to_string(c.deviation) + ")\n";
    }
    s += std::string("lindblad self-adjoint: ") + (lindblad_self_adjoint ? "yes" : "no") + "\n";
    return s;
  }
};

inline ValidationReport validate_system(const SystemSpec& spec) {
  ValidationReport r;
  const auto d = spec.dim;
  auto square = [d](const MatX& m) { return m.rows() == d && m.cols() == d; };

  const bool dims_ok = d > 0 && square(spec.hamiltonian) && square(spec.lindblad) &&
                       spec.initial_state.size() == d;
  r.checks.push_back({"dimensions", dims_ok, 0.0});
  if (!dims_ok) return r;

  const double h_dev = hermiticity_deviation(spec.hamiltonian);
  r.checks.push_back({"hamiltonian hermitian", h_dev <= kHermiticityTolerance, h_dev});

  const double n_dev = std::abs(spec.initial_state.norm() - 1.0);
  r.checks.push_back({"initial state unit norm", n_dev <= kNormTolerance, n_dev});

  for (const auto& obs : spec.observables) {
    if (!square(obs.matrix)) {
      r.checks.push_back({"observable " + obs.name + " dimensions", false, 0.0});
      continue;
    }
    const double o_dev = hermiticity_deviation(obs.matrix);
    r.checks.push_back({"observable " + obs.name + " hermitian", o_dev <= kHermiticityTolerance, o_dev});
  }

  r.lindblad_self_adjoint = hermiticity_deviation(spec.lindblad) <= kHermiticityTolerance;
  return r;
}

namespace presets {

/// H = omega J_z, L = J_- for spin 1, starting in the top state m = +1.
inline SystemSpec three_level(double omega) {
  const auto s = angular_momentum(2);
  SystemSpec spec;
  spec.dim = 3;
  spec.hamiltonian = omega * s.jz;
  spec.lindblad = s.jminus;
  spec.initial_state = VecX::Zero(3);
  spec.initial_state(0) = 1.0;
  spec.observables = {{"Jx", s.jx}, {"Jy", s.jy}, {"Jz", s.jz}};
  return spec;
}

/// H = (tunneling/2) sigma_x + (bias/2) sigma_z, L = sigma_z, starting in |up>.
inline SystemSpec spin_boson(double tunneling, double bias) {
  SystemSpec spec;
  spec.dim = 2;
  spec.hamiltonian = 0.5 * tunneling * pauli::x() + 0.5 * bias * pauli::z();
  spec.lindblad = pauli::z();
  spec.initial_state = VecX::Zero(2);
  spec.initial_state(0) = 1.0;
  spec.observables = {{"sx", pauli::x()}, {"sy", pauli::y()}, {"sz", pauli::z()}};
  return spec;
}

/// H = (omega/2) sigma_z, L = sigma_-, starting in the excited state.
inline SystemSpec qubit_decay(double omega) {
  SystemSpec spec;
  spec.dim = 2;
  spec.hamiltonian = 0.5 * omega * pauli::z();
  spec.lindblad = pauli::minus();
  spec.initial_state = VecX::Zero(2);
  spec.initial_state(0) = 1.0;
  spec.observables = {{"sx", pauli::x()}, {"sy", pauli::y()}, {"sz", pauli::z()}};
  return spec;
}

}  // namespace presets

/// Fixed-dimension copies of the operators an engine needs on its hot path.
template <int D>
struct SystemMatrices {
  Eigen::Index dim = 0;
  Mat<D> hamiltonian;
  Mat<D> minus_i_h;
  Mat<D> lindblad;
  Mat<D> lindblad_dag;
  Vec<D> initial_state;

  SystemMatrices() = default;

  explicit SystemMatrices(const SystemSpec& spec) : dim(spec.dim) {
    if constexpr (D != Eigen::Dynamic) {
      if (spec.dim != D) throw InvalidArgument("SystemMatrices: dimension mismatch");
    }
    if (spec.hamiltonian.rows() != dim || spec.lindblad.rows() != dim || spec.initial_state.size() != dim)
      throw InvalidArgument("SystemMatrices: operator dimensions do not match dim");
    hamiltonian = spec.hamiltonian;
    minus_i_h = -kI * hamiltonian;
    lindblad = spec.lindblad;
    lindblad_dag = lindblad.adjoint();
    initial_state = spec.initial_state;
  }
};

}  // namespace hfd
