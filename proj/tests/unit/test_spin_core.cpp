#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "lls/spin_core.hpp"

using namespace lls;

namespace {

Mat4 commutator(const Mat4& a, const Mat4& b) { return a * b - b * a; }

double maxabs(const Mat4& m) { return m.cwiseAbs().maxCoeff(); }

// direct construction of the singlet-triplet matrix from its entries,
// independent of the product-operator route
Mat4 st_matrix_reference(double omega, double j, double d) {
  Mat4 h = Mat4::Zero();
  h(0, 0) = j + 2 * d;
  h(1, 1) = j - 4 * d;
  h(2, 2) = -3 * j;
  h(3, 3) = j + 2 * d;
  h(1, 2) = h(2, 1) = -2 * omega;
  return 0.5 * kPi * h;
}

}  // namespace

TEST_CASE("product operators satisfy spin-1/2 algebra") {
  const Complex i(0, 1);
  CHECK(maxabs(commutator(I1x(), I1y()) - i * I1z()) < 1e-14);
  CHECK(maxabs(commutator(I2x(), I2y()) - i * I2z()) < 1e-14);
  CHECK(maxabs(commutator(I1x(), I2y())) < 1e-14);  // different spins commute
  CHECK(maxabs(commutator(I1z(), I2x())) < 1e-14);
  CHECK((I1z() * I1z()).trace().real() == doctest::Approx(1.0));
}

TEST_CASE("sixteen product operators are trace-orthogonal") {
  const auto basis = product_operator_basis();
  for (size_t a = 0; a < basis.size(); ++a) {
    for (size_t b = 0; b < basis.size(); ++b) {
      const Complex ip = (basis[a].adjoint() * basis[b]).trace();
      if (a == b)
        CHECK(ip.real() == doctest::Approx(1.0).epsilon(1e-12));
      else
        CHECK(std::abs(ip) < 1e-12);
    }
  }
}

TEST_CASE("I1z+I2z is diagonal in the singlet-triplet basis") {
  const Mat4 u = singlet_triplet_basis().columns;
  const Mat4 m = u.adjoint() * (I1z() + I2z()) * u;
  Mat4 expect = Mat4::Zero();
  expect(0, 0) = 1.0;
  expect(3, 3) = -1.0;
  CHECK(maxabs(m - expect) < 1e-14);
}

TEST_CASE("singlet-triplet basis is unitary with the right exchange symmetry") {
  const auto& bt = singlet_triplet_basis();
  CHECK(maxabs(bt.columns.adjoint() * bt.columns - Mat4::Identity()) < 1e-14);
  const Mat4& p = exchange_operator();
  // S0 antisymmetric, T columns symmetric
  CHECK((p * bt.columns.col(2) + bt.columns.col(2)).cwiseAbs().maxCoeff() < 1e-14);
  for (int c : {0, 1, 3})
    CHECK((p * bt.columns.col(c) - bt.columns.col(c)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("hamiltonian limits") {
  CHECK(maxabs(hamiltonian({0, 0, 0})) < 1e-14);

  // Zeeman-only: |01>, |10> eigenstates at -pi Omega, +pi Omega
  const Mat4 h = hamiltonian({10.0, 0, 0});
  Vec4 e01 = Vec4::Zero(), e10 = Vec4::Zero();
  e01(1) = 1.0;
  e10(2) = 1.0;
  CHECK((h * e01 + kPi * 10.0 * e01).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((h * e10 - kPi * 10.0 * e10).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hamiltonian eigenvalues match the direct matrix construction") {
  const SpinSystem sys{46.6, 3.1, 640.0};
  Eigen::SelfAdjointEigenSolver<Mat4> es(hamiltonian(sys));
  Eigen::SelfAdjointEigenSolver<Mat4> ref(
      st_matrix_reference(sys.omega, sys.j, sys.d));
  for (int i = 0; i < 4; ++i)
    CHECK(es.eigenvalues()(i) ==
          doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-12));
}

TEST_CASE("st-basis form equals the transformed hamiltonian") {
  for (const SpinSystem sys : {SpinSystem{46.6, 3.1, 640.0},
                               SpinSystem{50.0, 10.0, 600.0},
                               SpinSystem{-20.0, 5.0, -100.0},
                               SpinSystem{0.0, 7.0, 0.0}}) {
    const Mat4 u = singlet_triplet_basis().columns;
    const Mat4 transformed = u.adjoint() * hamiltonian(sys) * u;
    CHECK(maxabs(transformed - hamiltonian_st_basis(sys)) < 1e-10);
  }
}

TEST_CASE("T+-1 are eigenvectors for every coupling") {
  for (const SpinSystem sys : {SpinSystem{46.6, 3.1, 640.0},
                               SpinSystem{123.0, -4.0, 17.0}}) {
    const Mat4 h = hamiltonian(sys);
    for (int c : {0, 3}) {
      const Vec4 v = singlet_triplet_basis().columns.col(c);
      const Complex ev = v.dot(h * v);
      CHECK((h * v - ev * v).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("st-basis first row vanishes off the diagonal") {
  const Mat4 h = hamiltonian_st_basis({50.0, 10.0, 600.0});
  for (int c = 1; c < 4; ++c) CHECK(std::abs(h(0, c)) < 1e-14);
}

TEST_CASE("omega=0 block: S0 eigenstate at -3 pi J / 2") {
  const SpinSystem sys{0.0, 3.1, 640.0};
  const Mat4 h = hamiltonian(sys);
  const Vec4 s0 = singlet_triplet_basis().columns.col(2);
  CHECK((h * s0 + 1.5 * kPi * sys.j * s0).cwiseAbs().maxCoeff() < 1e-10);
  // singlet projector commutes with H, as does the exchange operator
  CHECK(maxabs(commutator(h, projector_singlet())) < 1e-10);
  CHECK(maxabs(commutator(h, exchange_operator())) < 1e-10);
}

TEST_CASE("mixed-block eigenvalues match the closed 2x2 formula") {
  const SpinSystem sys{50.0, 10.0, 600.0};
  // closed form for [[a, c], [c, b]]
  const double a = 0.5 * kPi * (sys.j - 4 * sys.d);
  const double b = 0.5 * kPi * (-3 * sys.j);
  const double c = 0.5 * kPi * (-2 * sys.omega);
  const double mid = 0.5 * (a + b);
  const double rad = std::sqrt(0.25 * (a - b) * (a - b) + c * c);
  Eigen::SelfAdjointEigenSolver<Mat4> es(hamiltonian(sys));
  std::vector<double> evs(es.eigenvalues().data(), es.eigenvalues().data() + 4);
  // the two non-(T+-1) eigenvalues
  const double et = 0.5 * kPi * (sys.j + 2 * sys.d);
  std::vector<double> mixed;
  int skipped = 0;
  for (double e : evs) {
    if (skipped < 2 && std::abs(e - et) < 1e-9 * std::abs(et)) {
      ++skipped;
      continue;
    }
    mixed.push_back(e);
  }
  REQUIRE(mixed.size() == 2);
  std::sort(mixed.begin(), mixed.end());
  CHECK(mixed[0] == doctest::Approx(mid - rad).epsilon(1e-12));
  CHECK(mixed[1] == doctest::Approx(mid + rad).epsilon(1e-12));
}

TEST_CASE("exchange operator swaps spin labels") {
  const Mat4& p = exchange_operator();
  CHECK(maxabs(p * p - Mat4::Identity()) < 1e-14);
  CHECK(maxabs(p * I1x() * p - I2x()) < 1e-14);
  CHECK(maxabs(p * I2z() * p - I1z()) < 1e-14);
}

TEST_CASE("thermal deviation state") {
  const DensityOperator rho0 = thermal_deviation();
  CHECK(std::abs(rho0.mat.trace()) < 1e-14);
  CHECK(expectation(rho0, I1z() + I2z()) == doctest::Approx(2.0));
  CHECK(expectation(rho0, I1x() + I2x()) == doctest::Approx(0.0));
  // no singlet-T0 imbalance at equilibrium
  CHECK(expectation(rho0, singlet_order_op()) == doctest::Approx(0.0));
}

TEST_CASE("expectation rejects non-Hermitian observables") {
  Mat4 bad = Mat4::Zero();
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(expectation(thermal_deviation(), bad), PhysicsError);
}

TEST_CASE("expectation of singlet order against its projector") {
  const DensityOperator rho(singlet_order_op());
  CHECK(expectation(rho, projector_singlet()) == doctest::Approx(1.0));
  const DensityOperator rho2(I1y() - I2y());
  CHECK(expectation(rho2, I1y() - I2y()) == doctest::Approx(2.0));
}

TEST_CASE("density operator validation") {
  CHECK_THROWS_AS(DensityOperator::deviation(raising_op(1)), PhysicsError);
  Mat4 with_trace = Mat4::Identity();
  CHECK_THROWS_AS(DensityOperator::deviation(with_trace), PhysicsError);
  CHECK_NOTHROW(DensityOperator::deviation(I1z() + I2z()));
}

TEST_CASE("spin system validation") {
  SpinSystem s{1.0, 1.0, 1.0};
  s.gamma = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.gamma = kGammaProton;
  s.omega = std::nan("");
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
