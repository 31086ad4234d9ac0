#include <gtest/gtest.h>

#include "hfd/model.hpp"

using namespace hfd;

namespace {

double max_abs(const MatX& m) { return m.cwiseAbs().maxCoeff(); }

MatX comm(const MatX& a, const MatX& b) { return a * b - b * a; }

}  // namespace

TEST(AngularMomentum, SpinHalfIsPauliOverTwo) {
  const auto s = angular_momentum(1);
  EXPECT_LT(max_abs(s.jz - 0.5 * pauli::z()), 1e-15);
  EXPECT_LT(max_abs(s.jx - 0.5 * pauli::x()), 1e-15);
  EXPECT_LT(max_abs(s.jy - 0.5 * pauli::y()), 1e-15);
}

TEST(AngularMomentum, SpinOneDiagonalAndLadder) {
  const auto s = angular_momentum(2);
  MatX jz = MatX::Zero(3, 3);
  jz.diagonal() << 1.0, 0.0, -1.0;
  EXPECT_LT(max_abs(s.jz - jz), 1e-15);
  // ladder entries below the diagonal
  EXPECT_NEAR(std::abs(s.jminus(1, 0)), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(s.jminus(2, 1)), std::sqrt(2.0), 1e-15);
  MatX rest = s.jminus;
  rest(1, 0) = rest(2, 1) = 0.0;
  EXPECT_EQ(max_abs(rest), 0.0);
  EXPECT_LT(max_abs(s.jminus - (s.jx - kI * s.jy)), 1e-15);
}

TEST(AngularMomentum, LadderElementsMatchFormula) {
  // <m-1| J_- |m> = sqrt(j(j+1) - m(m-1)) for every spin up to 4.
  for (int two_j = 1; two_j <= 8; ++two_j) {
    const auto s = angular_momentum(two_j);
    const double j = 0.5 * two_j;
    for (Eigen::Index a = 0; a + 1 <= two_j; ++a) {
      const double m = j - static_cast<double>(a);
      EXPECT_NEAR(s.jminus(a + 1, a).real(), std::sqrt(j * (j + 1) - m * (m - 1)), 1e-13);
    }
  }
}

TEST(AngularMomentum, CommutationRelationsAndCasimir) {
  for (int two_j = 1; two_j <= 8; ++two_j) {
    const auto s = angular_momentum(two_j);
    const double j = 0.5 * two_j;
    EXPECT_LT(max_abs(comm(s.jx, s.jy) - kI * s.jz), 1e-12) << two_j;
    EXPECT_LT(max_abs(comm(s.jy, s.jz) - kI * s.jx), 1e-12) << two_j;
    EXPECT_LT(max_abs(comm(s.jz, s.jx) - kI * s.jy), 1e-12) << two_j;
    const MatX casimir = s.jx * s.jx + s.jy * s.jy + s.jz * s.jz;
    EXPECT_LT(max_abs(casimir - j * (j + 1) * MatX::Identity(two_j + 1, two_j + 1)), 1e-12) << two_j;
  }
}

TEST(AngularMomentum, Deterministic) {
  const auto a = angular_momentum(5);
  const auto b = angular_momentum(5);
  EXPECT_TRUE(a.jx == b.jx && a.jy == b.jy && a.jz == b.jz && a.jminus == b.jminus);
  EXPECT_THROW(angular_momentum(-1), InvalidArgument);
}

namespace {

SystemSpec qubit(const MatX& h, const MatX& l, const VecX& psi) {
  SystemSpec s;
  s.dim = 2;
  s.hamiltonian = h;
  s.lindblad = l;
  s.initial_state = psi;
  return s;
}

}  // namespace

TEST(ValidateSystem, DecayingQubitPasses) {
  const auto r = validate_system(qubit(pauli::z(), pauli::minus(), VecX::Unit(2, 0)));
  EXPECT_TRUE(r.ok()) << r.summary();
  EXPECT_FALSE(r.lindblad_self_adjoint);
}

TEST(ValidateSystem, SelfAdjointFlag) {
  const auto r = validate_system(qubit(pauli::z(), pauli::z(), VecX::Unit(2, 0)));
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.lindblad_self_adjoint);
}

TEST(ValidateSystem, NormFailureReportsDeviation) {
  VecX psi(2);
  psi << 1.0, 1.0;
  const auto r = validate_system(qubit(pauli::z(), pauli::minus(), psi));
  ASSERT_FALSE(r.ok());
  const auto f = r.failures();
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].name, "initial state unit norm");
  EXPECT_NEAR(f[0].deviation, std::sqrt(2.0) - 1.0, 1e-15);
}

TEST(ValidateSystem, NonHermitianInputsAndBadDimensions) {
  auto s = qubit(pauli::minus(), pauli::z(), VecX::Unit(2, 0));
  EXPECT_FALSE(validate_system(s).ok());
  s = qubit(pauli::z(), pauli::z(), VecX::Unit(2, 0));
  s.observables.push_back({"bad", pauli::minus()});
  EXPECT_FALSE(validate_system(s).ok());
  s = qubit(pauli::z(), pauli::z(), VecX::Unit(3, 0));
  const auto r = validate_system(s);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failures()[0].name, "dimensions");
}

TEST(Presets, AllValidate) {
  for (const auto& s : {presets::three_level(1.0), presets::spin_boson(1.0, 0.3), presets::qubit_decay(2.0)})
    EXPECT_TRUE(validate_system(s).ok());
  const auto t = presets::three_level(2.0);
  EXPECT_LT(max_abs(t.hamiltonian - 2.0 * angular_momentum(2).jz), 1e-15);
  EXPECT_LT(max_abs(t.lindblad - angular_momentum(2).jminus), 1e-15);
}

TEST(SystemMatrices, RejectsDimensionMismatch) {
  EXPECT_THROW(SystemMatrices<2>(presets::three_level(1.0)), InvalidArgument);
  EXPECT_NO_THROW(SystemMatrices<Eigen::Dynamic>(presets::three_level(1.0)));
}
