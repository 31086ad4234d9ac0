#include <gtest/gtest.h>

#include <random>

#include "hfd/hfd_ou.hpp"
#include "hfd/oracles/exact_three_level.hpp"

using namespace hfd;

namespace {

MatX random_matrix(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatX m(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) m(a, b) = Complex(n(rng), n(rng));
  return m;
}

double max_abs(const MatX& m) { return m.cwiseAbs().maxCoeff(); }

SystemSpec bare_qubit(const MatX& h, const MatX& l) {
  SystemSpec s;
  s.dim = 2;
  s.hamiltonian = h;
  s.lindblad = l;
  s.initial_state = VecX::Unit(2, 0);
  s.observables = {{"sz", pauli::z()}};
  return s;
}

double jz_of(const VecX& psi) { return expectation(psi, angular_momentum(2).jz).real(); }

}  // namespace

TEST(HierarchyRhs, OnlySourceSurvivesAtZero) {
  const auto spec = presets::three_level(1.0);
  SystemMatrices<3> sys(spec);
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 2.0);
  std::vector<Mat<3>> q(4, Mat<3>::Zero());
  const auto dq = hierarchy_rhs(q, sys, k, Complex(0.3, -0.2));
  EXPECT_LT(max_abs(MatX(dq[0]) - 1.0 * spec.lindblad), 1e-15);
  for (std::size_t i = 1; i < dq.size(); ++i) EXPECT_EQ(max_abs(MatX(dq[i])), 0.0);
}

TEST(HierarchyRhs, HandAlgebraExample) {
  // H = 0, L = sigma_-, z = 0, N = 1, Q_0 = 0.2 sigma_-, Gamma = gamma = 1:
  // dQ_0 = (0.5 - 0.2 + 0.04) sigma_-.
  SystemMatrices<2> sys(bare_qubit(MatX::Zero(2, 2), pauli::minus()));
  std::vector<Mat<2>> q{0.2 * Mat<2>(pauli::minus()), Mat<2>::Zero()};
  const auto dq = hierarchy_rhs(q, sys, CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0), 0.0);
  EXPECT_LT(max_abs(MatX(dq[0]) - 0.34 * pauli::minus()), 1e-15);
}

TEST(HierarchyRhs, NonlinearTermBinomialExpansion) {
  // Isolate the nonlinear sum by subtracting the linear part computed by hand,
  // then compare with a term-by-term expansion using factorial-formula weights.
  std::mt19937_64 rng(5);
  const auto spec = presets::spin_boson(0.7, 0.2);
  SystemMatrices<Eigen::Dynamic> sys(spec);
  const auto kern = CorrelationKernel::ornstein_uhlenbeck(0.5, 0.4);
  const Complex c = kern.terms()[0].weight, nu = kern.terms()[0].rate;
  const Complex z(0.1, 0.3);
  const int n = 5;
  std::vector<MatX> q;
  for (int i = 0; i <= n; ++i) q.push_back(random_matrix(2, rng));
  const auto dq = hierarchy_rhs(q, sys, kern, z);
  const MatX& l = sys.lindblad;
  const MatX ld = sys.lindblad_dag;
  const MatX kmat = sys.minus_i_h + z * l;
  auto fact = [](int m) {
    double f = 1;
    for (int i = 2; i <= m; ++i) f *= i;
    return f;
  };
  for (int k = 0; k <= 4; ++k) {
    MatX linear = kmat * q[k] - q[k] * kmat - static_cast<double>(k + 1) * nu * q[k];
    if (k == 0) linear += c * l;
    if (k > 0) linear += static_cast<double>(k) * c * (l * q[k - 1] - q[k - 1] * l);
    if (k < n) linear -= ld * q[k + 1];
    MatX expanded = MatX::Zero(2, 2);
    int summands = 0;
    for (int i = 0; i <= k; ++i) {
      const double w = fact(k) / (fact(i) * fact(k - i));
      const MatX a = ld * q[i];
      expanded -= w * (a * q[k - i] - q[k - i] * a);
      ++summands;
    }
    EXPECT_EQ(summands, k + 1);
    EXPECT_LT(max_abs(dq[k] - linear - expanded), 1e-12) << k;
  }
}

TEST(HierarchyRhs, SourceLinearInCoupling) {
  SystemMatrices<3> sys(presets::three_level(1.0));
  std::vector<Mat<3>> q(3, Mat<3>::Zero());
  const auto a = hierarchy_rhs(q, sys, CorrelationKernel::ornstein_uhlenbeck(0.7, 1.3), 0.0);
  const auto b = hierarchy_rhs(q, sys, CorrelationKernel::ornstein_uhlenbeck(1.4, 1.3), 0.0);
  EXPECT_LT(max_abs(MatX(b[0] - 2.0 * a[0])), 1e-15);
}

TEST(HierarchyRhs, RejectsBadInput) {
  SystemMatrices<Eigen::Dynamic> sys(presets::three_level(1.0));
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  EXPECT_THROW(hierarchy_rhs(std::vector<MatX>{MatX::Zero(2, 2)}, sys, k, 0.0), InvalidArgument);
  EXPECT_THROW(hierarchy_rhs(std::vector<MatX>{}, sys, k, 0.0), InvalidArgument);
  EXPECT_THROW(OUHierarchy<Eigen::Dynamic>(sys, k, -1), InvalidArgument);
  EXPECT_THROW(OUHierarchy<Eigen::Dynamic>(sys, CorrelationKernel({{1.0, 1.0}, {1.0, 2.0}}), 2), InvalidArgument);
}

TEST(HierarchyRhs, IntegratedKernelClosedForm) {
  SystemMatrices<3> sys(presets::three_level(1.0));
  OUHierarchy<3> h(sys, CorrelationKernel::ornstein_uhlenbeck(0.8, 2.5), 2, Truncation::commutator);
  for (double t : {0.0, 0.3, 4.0}) EXPECT_NEAR(h.integrated_kernel(t).real(), 0.4 * (1 - std::exp(-2.5 * t)), 1e-15);
}

TEST(Propagate, NoBathIsUnitary) {
  // H = (D/2) sigma_x from |up>: psi(t) = cos(Dt/2)|up> - i sin(Dt/2)|down>.
  const double tunneling = 1.3;
  const auto spec = presets::spin_boson(tunneling, 0.0);
  const auto k = CorrelationKernel::ornstein_uhlenbeck(0.0, 1.0);
  const auto rec = propagate<2>(spec, k, sample_path(k, 5.0, 0.01, 1), OUTrajectoryOptions{4, {}, {}}, 5.0);
  for (std::size_t s = 0; s < rec.times.size(); s += 50) {
    const double t = rec.times[s];
    Vec<2> want(std::cos(0.5 * tunneling * t), Complex(0, -std::sin(0.5 * tunneling * t)));
    EXPECT_LT((rec.psi[s] - want).norm(), 1e-9) << t;
    for (const auto& q : rec.q[s]) EXPECT_EQ(q.norm(), 0.0);
  }
}

TEST(Propagate, NoHamiltonianNoCouplingIsStatic) {
  const auto spec = bare_qubit(MatX::Zero(2, 2), MatX::Zero(2, 2));
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto rec = propagate<2>(spec, k, sample_path(k, 2.0, 0.01, 3), OUTrajectoryOptions{2, {}, {}}, 2.0);
  for (const auto& psi : rec.psi) EXPECT_LT((psi - spec.initial_state).norm(), 1e-15);
}

TEST(Propagate, ConservedSigmaZWithoutBath) {
  auto spec = presets::qubit_decay(2.0);
  VecX psi(2);
  psi << 0.6, Complex(0.0, 0.8);
  spec.initial_state = psi;
  const auto k = CorrelationKernel::ornstein_uhlenbeck(0.0, 1.0);
  const auto rec = propagate<2>(spec, k, NoisePath::zeros(0.01, 1000), OUTrajectoryOptions{2, {}, {}}, 10.0);
  for (const auto& p : rec.psi) EXPECT_NEAR(expectation(p, pauli::z()).real(), 0.6 * 0.6 - 0.8 * 0.8, 1e-10);
}

TEST(Propagate, MatchesExactThreeLevelAtT5) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto path = sample_path(k, 5.0, 0.01, 2024);
  const auto hfd = propagate<3>(presets::three_level(1.0), k, path, OUTrajectoryOptions{10, {}, {}}, 5.0);
  const auto exact = oracles::exact_three_level(1.0, 1.0, 1.0, path, 0.01, 5.0);
  const double deficit = 1.0 - std::abs(hfd.psi.back().dot(exact.psi.back()));
  EXPECT_LT(deficit, 1e-8);
}

TEST(Propagate, OrderTenAndTwoAgreeOnThreeLevel) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto path = sample_path(k, 10.0, 0.01, 77);
  const auto spec = presets::three_level(1.0);
  const auto a = propagate<3>(spec, k, path, OUTrajectoryOptions{10, {}, {}}, 10.0);
  const auto b = propagate<3>(spec, k, path, OUTrajectoryOptions{2, {}, {}}, 10.0);
  for (std::size_t s = 0; s < a.psi.size(); ++s) EXPECT_NEAR(jz_of(a.psi[s]), jz_of(b.psi[s]), 1e-8);
}

TEST(Propagate, TruncationModesAgreeAboveNaturalOrder) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto path = sample_path(k, 5.0, 0.01, 8);
  const auto spec = presets::three_level(1.0);
  const auto a = propagate<3>(spec, k, path, OUTrajectoryOptions{3, Truncation::zero, {}}, 5.0);
  const auto b = propagate<3>(spec, k, path, OUTrajectoryOptions{3, Truncation::commutator, {}}, 5.0);
  for (std::size_t s = 0; s < a.psi.size(); ++s) EXPECT_LT((a.psi[s] - b.psi[s]).norm(), 1e-10);
}

TEST(Propagate, NormDriftWithoutRenormalization) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto path = sample_path(k, 10.0, 0.001, 31);
  OUTrajectoryOptions o{3, Truncation::zero, {}};
  o.propagation.dt = 0.001;
  o.propagation.renormalize = false;
  const auto free = propagate<3>(presets::three_level(1.0), k, path, o, 10.0);
  double drift = 0.0;
  for (const auto& p : free.psi) drift = std::max(drift, std::abs(p.norm() - 1.0));
  EXPECT_LE(drift, 1e-6);

  o.propagation.renormalize = true;
  const auto fixed = propagate<3>(presets::three_level(1.0), k, path, o, 10.0);
  for (const auto& p : fixed.psi) EXPECT_NEAR(p.norm(), 1.0, 1e-12);
}

TEST(Propagate, ThreeLevelHierarchyTerminatesNaturally) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto path = sample_path(k, 10.0, 0.001, 4);
  OUTrajectoryOptions o{5, Truncation::zero, {}};
  o.propagation.dt = 0.001;
  const auto rec = propagate<3>(presets::three_level(1.0), k, path, o, 10.0);
  std::vector<double> max_norm(6, 0.0);
  for (const auto& qs : rec.q)
    for (std::size_t i = 0; i < qs.size(); ++i) max_norm[i] = std::max(max_norm[i], trace_norm(qs[i]));
  for (std::size_t i = 2; i < max_norm.size(); ++i) EXPECT_LE(max_norm[i], 1e-8) << i;
  EXPECT_GT(max_norm[1], 1e-3);
  EXPECT_EQ(natural_termination(max_norm, 1e-8), 1);
}

TEST(Propagate, FourthOrderWithoutNoise) {
  // Zero noise path: successive differences shrink by 2^4.
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto spec = presets::three_level(1.0);
  std::vector<Vec<3>> finals;
  for (double dt : {0.04, 0.02, 0.01}) {
    OUTrajectoryOptions o{4, {}, {}};
    o.propagation.dt = dt;
    const auto steps = static_cast<std::size_t>(std::llround(4.0 / dt));
    finals.push_back(propagate<3>(spec, k, NoisePath::zeros(dt, steps), o, 4.0).psi.back());
  }
  const double ratio = (finals[0] - finals[1]).norm() / (finals[1] - finals[2]).norm();
  EXPECT_GT(ratio, 14.0);
  EXPECT_LT(ratio, 18.0);
}

TEST(Propagate, NonFiniteStateAborts) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(200.0, 1.0);
  OUTrajectoryOptions o{4, {}, {}};
  o.propagation.dt = 1.0;
  try {
    propagate<3>(presets::three_level(1.0), k, sample_path(k, 200.0, 1.0, 1), o, 200.0);
    FAIL() << "expected PropagationError";
  } catch (const PropagationError& e) {
    EXPECT_GT(e.time(), 0.0);
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(Propagate, RejectsIncompatiblePath) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto spec = presets::three_level(1.0);
  EXPECT_THROW(propagate<3>(spec, k, sample_path(k, 1.0, 0.01, 1), OUTrajectoryOptions{2, {}, {}}, 2.0),
               InvalidArgument);
  OUTrajectoryOptions o{2, {}, {}};
  o.propagation.dt = 0.015;
  EXPECT_THROW(propagate<3>(spec, k, sample_path(k, 3.0, 0.01, 1), o, 3.0), InvalidArgument);
}

TEST(NaturalTermination, Examples) {
  EXPECT_EQ(natural_termination({1.0, 0.5, 1e-12, 0.0}, 1e-8), 1);
  EXPECT_EQ(natural_termination({1.0, 1e-12}, 1e-8), 0);
  EXPECT_EQ(natural_termination({1.0, 0.5, 0.2}, 1e-8), -1);
  EXPECT_EQ(natural_termination({0.0, 0.0}, 1e-8), 0);
}
