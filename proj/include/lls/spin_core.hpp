#pragma once

#include <array>
#include <string>

#include "lls/types.hpp"

namespace lls {

// Physical parameters of the two-spin system. All couplings and shifts are
// user-facing values in Hz; hamiltonian() applies the angular-frequency
// factors internally.
struct SpinSystem {
  double omega = 0.0;  // chemical shift difference, Hz
  double j = 0.0;      // scalar coupling, Hz
  double d = 0.0;      // residual dipolar coupling, Hz
  double gamma = kGammaProton;  // rad s^-1 T^-1
  std::string label;

  void validate() const;
  SpinSystem with_d(double new_d) const {
    SpinSystem s = *this;
    s.d = new_d;
    return s;
  }
};

// Traceless deviation part of the density matrix. The Boltzmann prefactor is
// absorbed into signal normalization: thermal_deviation() is exactly I1z+I2z
// and all reported signals are relative to the one-pulse thermal signal.
struct DensityOperator {
  Mat4 mat = Mat4::Zero();

  DensityOperator() = default;
  explicit DensityOperator(const Mat4& m) : mat(m) {}

  // validates hermiticity and zero trace to 1e-12
  static DensityOperator deviation(const Mat4& m);

  void symmetrize() { mat = 0.5 * (mat + mat.adjoint()).eval(); }
};

// Single-spin product operators promoted to the two-spin space.
// Index i is 1 or 2; axis is 'x', 'y' or 'z'.
const Mat4& spin_op(int i, char axis);

inline const Mat4& I1x() { return spin_op(1, 'x'); }
inline const Mat4& I1y() { return spin_op(1, 'y'); }
inline const Mat4& I1z() { return spin_op(1, 'z'); }
inline const Mat4& I2x() { return spin_op(2, 'x'); }
inline const Mat4& I2y() { return spin_op(2, 'y'); }
inline const Mat4& I2z() { return spin_op(2, 'z'); }

Mat4 raising_op(int i);
Mat4 lowering_op(int i);

// all sixteen normalized product operators (identity included), orthogonal
// under the trace inner product
std::array<Mat4, 16> product_operator_basis();

// secular rotating-frame Hamiltonian,
//   H = -pi*Omega I1z + pi*Omega I2z + 2pi*J I1.I2 + 2pi*D (3 I1z I2z - I1.I2)
Mat4 hamiltonian(const SpinSystem& sys);

// Singlet-triplet basis transform. Columns are |T+1>,|T0>,|S0>,|T-1>
// expressed in the computational basis.
struct BasisTransform {
  Mat4 columns;
  std::array<int, 4> total_spin;  // S quantum number per column
  std::array<int, 4> m_s;         // m_S per column
};
const BasisTransform& singlet_triplet_basis();

// the same Hamiltonian written directly in the singlet-triplet basis:
//   (pi/2) * diag(J+2D, J-4D, -3J, J+2D) with off-diagonal -pi*Omega
// coupling T0 and S0
Mat4 hamiltonian_st_basis(const SpinSystem& sys);

// spin-label exchange: P|ab> = |ba>
const Mat4& exchange_operator();

// rho0 = I1z + I2z (deviation convention)
DensityOperator thermal_deviation();

// trace(rho * obs); rejects non-Hermitian observables, discards the
// (checked) imaginary residue
double expectation(const DensityOperator& rho, const Mat4& obs);
double expectation(const Mat4& rho, const Mat4& obs);

// projectors and the states of the M2S chain (Fig. 4 of the sequence layout)
const Mat4& projector_singlet();
const Mat4& projector_t0();
// |S0><S0| - |T0><T0|
const Mat4& singlet_order_op();

// deviation operators rho1..rho5 that the magnetization-to-singlet chain
// passes through; rho_k_target(5) == singlet_order_op()
const Mat4& rho_k_target(int k);

// eigenvector projector of hamiltonian(sys) with the largest singlet overlap;
// its population is conserved under coherent storage for any Omega
Mat4 singlet_branch_projector(const SpinSystem& sys);

}  // namespace lls
