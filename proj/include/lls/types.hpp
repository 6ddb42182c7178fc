#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace lls {

using Complex = std::complex<double>;
using Mat4 = Eigen::Matrix4cd;
using Vec4 = Eigen::Vector4cd;
using Mat16 = Eigen::Matrix<Complex, 16, 16>;
using Vec16 = Eigen::Matrix<Complex, 16, 1>;

// Operators live in the computational basis |00>,|01>,|10>,|11> (spin 1 first).
// Hamiltonians are in angular frequency units (rad/s); observables dimensionless.
using Operator = Mat4;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// proton gyromagnetic ratio, rad s^-1 T^-1
inline constexpr double kGammaProton = 2.675e8;

inline constexpr double kHermTol = 1e-12;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// physically ill-posed request (e.g. resonance condition with omega = 0)
struct PhysicsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double herm_deviation(const Mat4& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Mat4& m, double tol = kHermTol) {
  return herm_deviation(m) <= tol;
}

// round-trip-safe text form for doubles; identical across runs and platforms
// with the same libc, which is what the determinism contract asks for
std::string format_double(double v);

// FNV-1a 64-bit, used for config/output provenance hashes
uint64_t fnv1a64(const void* data, size_t n);
std::string fnv1a64_hex(const std::string& s);

}  // namespace lls
