#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hfd/hfd_ou.hpp"
#include "hfd/oracles/exact_three_level.hpp"
#include "hfd/oracles/hops.hpp"
#include "hfd/oracles/lindblad.hpp"
#include "hfd/oracles/sde.hpp"

using namespace hfd;
using namespace hfd::oracles;

namespace {

MatX random_matrix(Eigen::Index d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatX m(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) m(a, b) = Complex(n(rng), n(rng));
  return m;
}

double max_abs(const MatX& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(SdeHierarchy, KeyCountMatchesBruteForce) {
  for (int n = 0; n <= 30; ++n) {
    std::set<std::pair<int, int>> seen;
    for (int a = 0; a <= n; ++a)
      for (int b = 0; b <= n; ++b)
        if (a <= b) seen.insert({a, b});
    const auto keys = sde_keys(n);
    EXPECT_EQ(keys.size(), seen.size());
    EXPECT_EQ(sde_count(n), static_cast<std::size_t>((n + 1) * (n + 2) / 2));
    for (std::size_t i = 0; i < keys.size(); ++i) EXPECT_EQ(sde_index(keys[i].m, keys[i].n), i);
  }
}

TEST(SdeHierarchy, OnlySourceAtZero) {
  const auto spec = presets::spin_boson(1.0, 0.0);
  SystemMatrices<2> sys(spec);
  const auto k = CorrelationKernel::ornstein_uhlenbeck(0.5, 0.4);
  SdeHierarchy<2> h(sys, k, 4);
  std::vector<Mat<2>> q(h.size(), Mat<2>::Zero()), dq(h.size(), Mat<2>::Zero());
  h.rhs(0.0, Complex(0.3, 0.3), q, dq);
  EXPECT_LT(max_abs(MatX(dq[sde_index(0, 0)]) - 0.1 * spec.lindblad), 1e-15);
  for (std::size_t i = 1; i < dq.size(); ++i) EXPECT_EQ(max_abs(MatX(dq[i])), 0.0);
}

TEST(SdeHierarchy, RejectsNonOuKernel) {
  SystemMatrices<2> sys(presets::spin_boson(1.0, 0.0));
  EXPECT_THROW(SdeHierarchy<2>(sys, CorrelationKernel({{1.0, 1.0}, {1.0, 2.0}}), 3), InvalidArgument);
  EXPECT_THROW(SdeHierarchy<2>(sys, CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0), 31), InvalidArgument);
}

namespace {

// Largest |grouped SDE Q_k - HFD Q_k| over k <= 3 and the path, both driven by
// the same shifted noise.
double grouped_identity_deviation(const SystemSpec& spec, const CorrelationKernel& k, int order, int hfd_order,
                                  double horizon) {
  return dispatch_dimension(spec.dim, [&]<int D>(DimTag<D>) {
    SystemMatrices<D> sys(spec);
    using Pair = PairedHierarchy<D, OUHierarchy<D>, SdeHierarchy<D>>;
    Pair pair(OUHierarchy<D>(sys, k, hfd_order), SdeHierarchy<D>(sys, k, order));
    TrajectoryPropagator<D, Pair> prop(sys, k, std::move(pair));
    const auto path = sample_path(k, horizon, 0.01, 7);
    double dev = 0.0;
    prop.run(path, step_count(horizon, 0.01), [&](const StepView<D>& s) {
      const auto n = prop.hierarchy().driver_size();
      for (int kk = 0; kk <= 3; ++kk) {
        const Mat<D> g = prop.hierarchy().follower().grouped(s.q.subspan(n), kk);
        dev = std::max(dev, MatX(g - s.q[kk]).cwiseAbs().maxCoeff());
      }
    });
    return dev;
  });
}

}  // namespace

TEST(SdeHierarchy, GroupedIdentityExactOnThreeLevel) {
  EXPECT_LT(grouped_identity_deviation(presets::three_level(1.0), CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0), 6,
                                       6, 5.0),
            1e-8);
}

TEST(SdeHierarchy, GroupedIdentityImprovesWithNoiseOrder) {
  const auto spec = presets::spin_boson(1.0, 0.0);
  const auto k = CorrelationKernel::ornstein_uhlenbeck(0.5, 0.4);
  const double d6 = grouped_identity_deviation(spec, k, 6, 16, 3.0);
  const double d12 = grouped_identity_deviation(spec, k, 12, 16, 3.0);
  EXPECT_LT(d12, 0.01 * d6);
}

TEST(Hops, FirstStateAndInitialConditions) {
  std::mt19937_64 rng(1);
  std::vector<MatX> q{random_matrix(3, rng), random_matrix(3, rng)};
  const VecX psi0 = VecX::Unit(3, 0);
  const auto s = hops_states<Eigen::Dynamic>(q, psi0, 2);
  EXPECT_LT((s[1] - q[0] * psi0).norm(), 1e-15);
  const std::vector<MatX> zeros(6, MatX::Zero(3, 3));
  const auto z = hops_states<Eigen::Dynamic>(zeros, psi0, 6);
  for (int i = 1; i <= 6; ++i) EXPECT_EQ(z[i].norm(), 0.0);
  EXPECT_THROW(hops_states<Eigen::Dynamic>(q, psi0, 3), InvalidArgument);
}

TEST(Hops, RecursionMatchesExpansion) {
  std::mt19937_64 rng(3);
  std::vector<MatX> q;
  for (int i = 0; i < 8; ++i) q.push_back(random_matrix(3, rng, 0.5));
  VecX psi0(3);
  psi0 << 0.6, Complex(0, 0.8), 0.0;
  const auto a = hops_states<Eigen::Dynamic>(q, psi0, 8);
  const auto b = hops_states_expanded<Eigen::Dynamic>(q, psi0, 8);
  for (int k = 0; k <= 8; ++k) EXPECT_LT((a[k] - b[k]).norm(), 1e-12 * std::max(1.0, a[k].norm())) << k;
}

TEST(Hops, ThreeLevelNeedsOnlyTwoOperators) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto rec = propagate<3>(presets::three_level(1.0), k, sample_path(k, 5.0, 0.01, 3),
                                OUTrajectoryOptions{6, {}, {}}, 5.0);
  for (std::size_t s = 0; s < rec.q.size(); s += 25) {
    std::vector<Mat<3>> two(rec.q[s].size(), Mat<3>::Zero());
    two[0] = rec.q[s][0];
    two[1] = rec.q[s][1];
    const auto full = hops_states<3>(rec.q[s], rec.psi[s], 6);
    const auto reduced = hops_states<3>(two, rec.psi[s], 6);
    for (int i = 0; i <= 6; ++i) EXPECT_LT((full[i] - reduced[i]).norm(), 1e-10);
  }
}

TEST(ExactThreeLevel, InitialDerivativeAndNoCoupling) {
  ExactThreeLevel h(1.0, 1.0);
  h.set_hamiltonian(Mat<3>(presets::three_level(1.0).hamiltonian));
  std::vector<Mat<3>> q(2, Mat<3>::Zero()), dq(2, Mat<3>::Zero());
  h.rhs(0.0, Complex(0.5, 0.5), q, dq);
  EXPECT_LT(max_abs(MatX(dq[0]) - 0.5 * angular_momentum(2).jminus), 1e-15);
  EXPECT_EQ(max_abs(MatX(dq[1])), 0.0);

  const auto k0 = CorrelationKernel::ornstein_uhlenbeck(0.0, 1.0);
  const auto rec = exact_three_level(1.0, 0.0, 1.0, sample_path(k0, 3.0, 0.01, 1), 0.01, 3.0);
  for (const auto& qs : rec.q)
    for (const auto& m : qs) EXPECT_EQ(m.norm(), 0.0);
}

TEST(ExactThreeLevel, MatchesOuEngineObservables) {
  const auto k = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
  const auto path = sample_path(k, 10.0, 0.01, 99);
  const auto exact = exact_three_level(1.0, 1.0, 1.0, path, 0.01, 10.0);
  const auto hfd = propagate<3>(presets::three_level(1.0), k, path, OUTrajectoryOptions{10, {}, {}}, 10.0);
  const auto s = angular_momentum(2);
  for (std::size_t i = 0; i < exact.psi.size(); ++i)
    for (const MatX* a : {&s.jx, &s.jy, &s.jz})
      EXPECT_NEAR(expectation(exact.psi[i], *a).real(), expectation(hfd.psi[i], *a).real(), 1e-8);
}

TEST(Lindblad, UnitaryWithoutCoupling) {
  auto spec = presets::spin_boson(1.0, 0.5);
  VecX psi(2);
  psi << 0.6, 0.8;
  spec.initial_state = psi;
  const auto out = lindblad_oracle(spec, 0.0, 0.01, 10.0);
  for (const auto& r : out.rho) EXPECT_NEAR((r * r).trace().real(), 1.0, 1e-10);
}

TEST(Lindblad, AmplitudeDampingClosedForm) {
  SystemSpec s;
  s.dim = 2;
  s.hamiltonian = MatX::Zero(2, 2);
  s.lindblad = pauli::minus();
  s.initial_state = VecX::Unit(2, 0);
  const double rate = 0.5;
  const auto out = lindblad_oracle(s, rate, 0.001, 1.0 / rate);
  EXPECT_NEAR(out.rho.back()(0, 0).real(), std::exp(-1.0), 1e-8);
  for (const auto& r : out.rho) {
    EXPECT_NEAR(std::abs(r.trace() - Complex(1.0)), 0.0, 1e-12);
    EXPECT_LT((r - r.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(r);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  }
}
