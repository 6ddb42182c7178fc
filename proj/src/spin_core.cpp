#include "lls/spin_core.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include <Eigen/Eigenvalues>

namespace lls {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

uint64_t fnv1a64(const void* data, size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& s) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
  return buf;
}

void SpinSystem::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("SpinSystem: gamma must be positive");
  if (!std::isfinite(omega) || !std::isfinite(j) || !std::isfinite(d))
    throw ConfigError("SpinSystem: omega, j, d must be finite");
}

DensityOperator DensityOperator::deviation(const Mat4& m) {
  if (!is_hermitian(m))
    throw PhysicsError("DensityOperator: matrix not Hermitian");
  if (std::abs(m.trace()) > kHermTol)
    throw PhysicsError("DensityOperator: deviation matrix must be traceless");
  return DensityOperator(m);
}

namespace {

Mat4 kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Eigen::Matrix2cd half_sigma(char axis) {
  Eigen::Matrix2cd m;
  const Complex i(0.0, 1.0);
  switch (axis) {
    case 'x': m << 0, 0.5, 0.5, 0; break;
    case 'y': m << 0, -0.5 * i, 0.5 * i, 0; break;
    case 'z': m << 0.5, 0, 0, -0.5; break;
    default: throw std::invalid_argument("spin_op: axis must be x, y or z");
  }
  return m;
}

struct OpTable {
  Mat4 op[2][3];
  OpTable() {
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    const char axes[3] = {'x', 'y', 'z'};
    for (int a = 0; a < 3; ++a) {
      op[0][a] = kron2(half_sigma(axes[a]), id);
      op[1][a] = kron2(id, half_sigma(axes[a]));
    }
  }
};

int axis_index(char axis) {
  switch (axis) {
    case 'x': return 0;
    case 'y': return 1;
    case 'z': return 2;
    default: throw std::invalid_argument("spin_op: axis must be x, y or z");
  }
}

}  // namespace

const Mat4& spin_op(int i, char axis) {
  static const OpTable table;
  if (i != 1 && i != 2) throw std::invalid_argument("spin_op: spin index must be 1 or 2");
  return table.op[i - 1][axis_index(axis)];
}

Mat4 raising_op(int i) {
  return spin_op(i, 'x') + Complex(0, 1) * spin_op(i, 'y');
}

Mat4 lowering_op(int i) {
  return spin_op(i, 'x') - Complex(0, 1) * spin_op(i, 'y');
}

std::array<Mat4, 16> product_operator_basis() {
  // normalized products of {E/sqrt2, sqrt2*Ix, sqrt2*Iy, sqrt2*Iz} per spin
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  const std::array<Eigen::Matrix2cd, 4> s = {
      id / std::sqrt(2.0), std::sqrt(2.0) * half_sigma('x'),
      std::sqrt(2.0) * half_sigma('y'), std::sqrt(2.0) * half_sigma('z')};
  std::array<Mat4, 16> basis;
  int k = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) basis[k++] = kron2(s[a], s[b]);
  return basis;
}

Mat4 hamiltonian(const SpinSystem& sys) {
  sys.validate();
  const Mat4 dot = I1x() * I2x() + I1y() * I2y() + I1z() * I2z();
  Mat4 h = -kPi * sys.omega * I1z() + kPi * sys.omega * I2z();
  h += kTwoPi * sys.j * dot;
  h += kTwoPi * sys.d * (3.0 * I1z() * I2z() - dot);
  return h;
}

const BasisTransform& singlet_triplet_basis() {
  static const BasisTransform bt = [] {
    BasisTransform b;
    const double r = 1.0 / std::sqrt(2.0);
    b.columns.setZero();
    b.columns(0, 0) = 1.0;               // |T+1> = |00>
    b.columns(1, 1) = r;                 // |T0>  = (|01>+|10>)/sqrt2
    b.columns(2, 1) = r;
    b.columns(1, 2) = r;                 // |S0>  = (|01>-|10>)/sqrt2
    b.columns(2, 2) = -r;
    b.columns(3, 3) = 1.0;               // |T-1> = |11>
    b.total_spin = {1, 1, 0, 1};
    b.m_s = {1, 0, 0, -1};
    return b;
  }();
  return bt;
}

Mat4 hamiltonian_st_basis(const SpinSystem& sys) {
  sys.validate();
  Mat4 h = Mat4::Zero();
  const double s = 0.5 * kPi;
  h(0, 0) = s * (sys.j + 2.0 * sys.d);
  h(1, 1) = s * (sys.j - 4.0 * sys.d);
  h(2, 2) = s * (-3.0 * sys.j);
  h(3, 3) = s * (sys.j + 2.0 * sys.d);
  h(1, 2) = s * (-2.0 * sys.omega);
  h(2, 1) = s * (-2.0 * sys.omega);
  return h;
}

const Mat4& exchange_operator() {
  static const Mat4 p = [] {
    Mat4 m = Mat4::Zero();
    m(0, 0) = 1.0;
    m(3, 3) = 1.0;
    m(1, 2) = 1.0;
    m(2, 1) = 1.0;
    return m;
  }();
  return p;
}

DensityOperator thermal_deviation() {
  return DensityOperator(I1z() + I2z());
}

double expectation(const Mat4& rho, const Mat4& obs) {
  if (!is_hermitian(obs)) throw PhysicsError("expectation: observable not Hermitian");
  const Complex tr = (rho * obs).trace();
  if (std::abs(tr.imag()) > 1e-12 * std::max(1.0, std::abs(tr.real())))
    throw SimulationError("expectation: imaginary residue above tolerance");
  return tr.real();
}

double expectation(const DensityOperator& rho, const Mat4& obs) {
  return expectation(rho.mat, obs);
}

const Mat4& projector_singlet() {
  static const Mat4 p = [] {
    const Vec4 s0 = singlet_triplet_basis().columns.col(2);
    return Mat4(s0 * s0.adjoint());
  }();
  return p;
}

const Mat4& projector_t0() {
  static const Mat4 p = [] {
    const Vec4 t0 = singlet_triplet_basis().columns.col(1);
    return Mat4(t0 * t0.adjoint());
  }();
  return p;
}

const Mat4& singlet_order_op() {
  static const Mat4 q = projector_singlet() - projector_t0();
  return q;
}

const Mat4& rho_k_target(int k) {
  static const std::array<Mat4, 5> targets = [] {
    std::array<Mat4, 5> t;
    t[0] = I1x() + I2x();
    t[1] = I1y() - I2y();
    t[2] = I1z() - I2z();
    t[3] = 2.0 * (I1y() * I2x() - I1x() * I2y());
    t[4] = singlet_order_op();
    return t;
  }();
  if (k < 1 || k > 5) throw std::invalid_argument("rho_k_target: k must be 1..5");
  return targets[k - 1];
}

Mat4 singlet_branch_projector(const SpinSystem& sys) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(hamiltonian(sys));
  const Vec4 s0 = singlet_triplet_basis().columns.col(2);
  int best = 0;
  double best_ov = -1.0;
  for (int i = 0; i < 4; ++i) {
    const double ov = std::norm(es.eigenvectors().col(i).dot(s0));
    if (ov > best_ov) {
      best_ov = ov;
      best = i;
    }
  }
  const Vec4 v = es.eigenvectors().col(best);
  return v * v.adjoint();
}

}  // namespace lls
