#include "lls/evolution.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace lls {

namespace {

void check_exchange_symmetric(const std::vector<Mat4>& gens) {
  const Mat4& p = exchange_operator();
  for (const Mat4& g : gens) {
    if ((p * g * p - g).cwiseAbs().maxCoeff() > 1e-12)
      throw PhysicsError(
          "RelaxationChannel: generator breaks exchange symmetry");
  }
}

// normalized rank-2 two-spin tensor operators as Hermitian combinations
std::vector<Mat4> dipolar_generators() {
  const Complex i(0.0, 1.0);
  const Mat4 ip1 = raising_op(1), im1 = lowering_op(1);
  const Mat4 ip2 = raising_op(2), im2 = lowering_op(2);
  const Mat4 t20 =
      (4.0 * I1z() * I2z() - ip1 * im2 - im1 * ip2) / std::sqrt(6.0);
  const Mat4 t2p1 = -(I1z() * ip2 + ip1 * I2z()) / std::sqrt(2.0);
  const Mat4 t2p2 = ip1 * ip2;
  const double r = 1.0 / std::sqrt(2.0);
  return {
      t20,
      r * (t2p1 + t2p1.adjoint()),
      r * i * (t2p1 - t2p1.adjoint()),
      r * (t2p2 + t2p2.adjoint()),
      r * i * (t2p2 - t2p2.adjoint()),
  };
}

}  // namespace

RelaxationChannel RelaxationChannel::exchange_symmetric_dipolar(double rate) {
  RelaxationChannel c{ChannelKind::ExchangeSymmetricDipolar, rate,
                      dipolar_generators()};
  if (rate < 0.0) throw PhysicsError("RelaxationChannel: negative rate");
  check_exchange_symmetric(c.generators);
  return c;
}

RelaxationChannel RelaxationChannel::uncorrelated_random_field(double rate) {
  if (rate < 0.0) throw PhysicsError("RelaxationChannel: negative rate");
  return {ChannelKind::UncorrelatedRandomField,
          rate,
          {I1x(), I1y(), I1z(), I2x(), I2y(), I2z()}};
}

RelaxationChannel RelaxationChannel::correlated_random_field(double rate) {
  if (rate < 0.0) throw PhysicsError("RelaxationChannel: negative rate");
  RelaxationChannel c{ChannelKind::CorrelatedRandomField,
                      rate,
                      {I1x() + I2x(), I1y() + I2y(), I1z() + I2z()}};
  check_exchange_symmetric(c.generators);
  return c;
}

RelaxationChannel RelaxationChannel::custom(ChannelKind kind, double rate,
                                            std::vector<Mat4> generators) {
  if (rate < 0.0) throw PhysicsError("RelaxationChannel: negative rate");
  RelaxationChannel c{kind, rate, std::move(generators)};
  if (kind != ChannelKind::UncorrelatedRandomField)
    check_exchange_symmetric(c.generators);
  return c;
}

Mat4 evolution_unitary(const Mat4& h, double t) {
  if (!is_hermitian(h, 1e-10))
    throw PhysicsError("evolution_unitary: Hamiltonian not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat4> es(h);
  Vec4 phases;
  for (int i = 0; i < 4; ++i)
    phases(i) = std::exp(Complex(0.0, -es.eigenvalues()(i) * t));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Mat4 pulse_unitary(double flip, double phase) {
  const Mat4 g = (I1x() + I2x()) * std::cos(phase) +
                 (I1y() + I2y()) * std::sin(phase);
  return evolution_unitary(g, flip);
}

DensityOperator evolve_coherent(const DensityOperator& rho, const Mat4& h,
                                double t) {
  if (t < 0.0) throw PhysicsError("evolve_coherent: negative duration");
  const Mat4 u = evolution_unitary(h, t);
  DensityOperator out(u * rho.mat * u.adjoint());
  out.symmetrize();
  return out;
}

DensityOperator apply_pulse(const DensityOperator& rho, double flip,
                            double phase) {
  const Mat4 r = pulse_unitary(flip, phase);
  DensityOperator out(r * rho.mat * r.adjoint());
  out.symmetrize();
  return out;
}

namespace {

// column-stacking: vec(A X B) = (B^T kron A) vec(X)
Mat16 kron_bt_a(const Mat4& a, const Mat4& b) {
  Mat16 out;
  const Mat4 bt = b.transpose();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      out.block<4, 4>(4 * i, 4 * j) = bt(i, j) * a;
  return out;
}

Vec16 vec_of(const Mat4& m) {
  Vec16 v;
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r) v(4 * c + r) = m(r, c);
  return v;
}

Mat4 mat_of(const Vec16& v) {
  Mat4 m;
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r) m(r, c) = v(4 * c + r);
  return m;
}

Mat4 dissipator_apply(const std::vector<RelaxationChannel>& channels,
                      const Mat4& rho) {
  Mat4 out = Mat4::Zero();
  for (const auto& c : channels) {
    if (c.rate == 0.0) continue;
    for (const Mat4& g : c.generators) {
      const Mat4 gdg = g.adjoint() * g;
      out += c.rate * (g * rho * g.adjoint() -
                       0.5 * (gdg * rho + rho * gdg));
    }
  }
  return out;
}

}  // namespace

Mat16 liouvillian(const Mat4& h, const std::vector<RelaxationChannel>& channels) {
  const Mat4 id = Mat4::Identity();
  const Complex i(0.0, 1.0);
  Mat16 l = -i * (kron_bt_a(h, id) - kron_bt_a(id, h));
  for (const auto& c : channels) {
    if (c.rate == 0.0) continue;
    for (const Mat4& g : c.generators) {
      const Mat4 gdg = g.adjoint() * g;
      l += c.rate * (kron_bt_a(g, g.adjoint()) -
                     0.5 * kron_bt_a(gdg, id) - 0.5 * kron_bt_a(id, gdg));
    }
  }
  return l;
}

Mat16 dissipative_propagator(const Mat4& h,
                             const std::vector<RelaxationChannel>& channels,
                             double t) {
  if (t < 0.0) throw PhysicsError("dissipative_propagator: negative duration");
  const Eigen::MatrixXcd l = liouvillian(h, channels) * t;
  const Eigen::MatrixXcd p = l.exp();
  return Mat16(p);
}

Mat4 apply_propagator(const Mat16& prop, const Mat4& rho, const Mat4& rho_eq,
                      bool relax_to_equilibrium) {
  if (!relax_to_equilibrium) return mat_of(prop * vec_of(rho));
  // [H, rho_eq] = 0 for all secular Hamiltonians here, so the inhomogeneous
  // master equation reduces to the homogeneous one in chi = rho - rho_eq
  const Mat4 chi = rho - rho_eq;
  return rho_eq + mat_of(prop * vec_of(chi));
}

DensityOperator evolve_dissipative(const DensityOperator& rho, const Mat4& h,
                                   const std::vector<RelaxationChannel>& channels,
                                   double t, const DissipativeOptions& opts) {
  if (t < 0.0) throw PhysicsError("evolve_dissipative: negative duration");
  const Mat16 prop = dissipative_propagator(h, channels, t);
  DensityOperator out(
      apply_propagator(prop, rho.mat, opts.rho_eq, opts.relax_to_equilibrium));
  out.symmetrize();
  return out;
}

DensityOperator evolve_dissipative_rk4(const DensityOperator& rho, const Mat4& h,
                                       const std::vector<RelaxationChannel>& channels,
                                       double t, double dt,
                                       const DissipativeOptions& opts) {
  if (t < 0.0 || dt <= 0.0)
    throw PhysicsError("evolve_dissipative_rk4: bad duration or step");
  const Complex i(0.0, 1.0);
  auto deriv = [&](const Mat4& x) -> Mat4 {
    return -i * (h * x - x * h) + dissipator_apply(channels, x);
  };
  Mat4 x = opts.relax_to_equilibrium ? Mat4(rho.mat - opts.rho_eq) : rho.mat;
  const double norm0 = x.norm();
  const long nsteps = std::lround(std::ceil(t / dt));
  const double hstep = t / static_cast<double>(nsteps);
  for (long s = 0; s < nsteps; ++s) {
    const Mat4 k1 = deriv(x);
    const Mat4 k2 = deriv(x + 0.5 * hstep * k1);
    const Mat4 k3 = deriv(x + 0.5 * hstep * k2);
    const Mat4 k4 = deriv(x + hstep * k3);
    x += (hstep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  // the master equation is contractive around the fixed point, so any norm
  // growth flags an unstable step
  const bool grew = x.norm() > 10.0 * norm0 + 1e-12;
  if (opts.relax_to_equilibrium) x += opts.rho_eq;
  const double drift = herm_deviation(x);
  if (!x.allFinite() || grew || drift > 1e-6)
    throw SimulationError(
        "evolve_dissipative_rk4: integrator diverged (hermiticity drift " +
        format_double(drift) + " after " + std::to_string(nsteps) +
        " steps of " + format_double(hstep) + " s); reduce the step");
  DensityOperator out(x);
  out.symmetrize();
  return out;
}

// ---------------------------------------------------------------------------
// ZEnsemble
// ---------------------------------------------------------------------------

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t index) {
  // splitmix64 over (seed, index)
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

int coherence_order(int row, int col) {
  static const int m[4] = {1, 0, 0, -1};
  return m[row] - m[col];
}

}  // namespace

ZEnsemble ZEnsemble::harmonic(const DensityOperator& rho0, double gamma,
                              double length_m) {
  ZEnsemble e;
  e.backend_ = EnsembleBackend::Harmonic;
  e.diffusion_mode_ = DiffusionMode::Analytic;
  e.gamma_ = gamma;
  e.length_ = length_m;
  e.modes_.push_back({0.0, rho0.mat});
  return e;
}

ZEnsemble ZEnsemble::monte_carlo(const DensityOperator& rho0, double gamma,
                                 double length_m, int n_slices, uint64_t seed) {
  if (n_slices < 1) throw ConfigError("ZEnsemble: n_slices must be >= 1");
  ZEnsemble e;
  e.backend_ = EnsembleBackend::MonteCarlo;
  e.diffusion_mode_ = DiffusionMode::MonteCarlo;
  e.gamma_ = gamma;
  e.length_ = length_m;
  e.slices_.resize(n_slices);
  for (int i = 0; i < n_slices; ++i) {
    e.slices_[i].z = length_m * ((i + 0.5) / n_slices - 0.5);
    e.slices_[i].rho = rho0.mat;
    e.slices_[i].rng.seed(mix_seed(seed, static_cast<uint64_t>(i)));
  }
  return e;
}

int ZEnsemble::slice_count() const {
  return backend_ == EnsembleBackend::MonteCarlo
             ? static_cast<int>(slices_.size())
             : static_cast<int>(modes_.size());
}

void ZEnsemble::apply_unitary(const Mat4& u) {
  if (backend_ == EnsembleBackend::Harmonic) {
    for (auto& m : modes_) m.coeff = u * m.coeff * u.adjoint();
  } else {
    for (auto& s : slices_) s.rho = u * s.rho * u.adjoint();
  }
}

void ZEnsemble::apply_propagator(const Mat16& prop, const Mat4& rho_eq,
                                 bool relax_to_equilibrium) {
  if (backend_ == EnsembleBackend::Harmonic) {
    for (auto& m : modes_) {
      // the equilibrium is spatially uniform: gratings decay to zero while
      // only the unwound component recovers toward rho_eq
      const bool uniform = std::abs(m.kappa) < 1e-12;
      m.coeff = lls::apply_propagator(prop, m.coeff, rho_eq,
                                      relax_to_equilibrium && uniform);
    }
  } else {
    for (auto& s : slices_)
      s.rho = lls::apply_propagator(prop, s.rho, rho_eq, relax_to_equilibrium);
  }
}

void ZEnsemble::add_mode(double kappa, const Mat4& coeff) {
  const double tol = 1e-6 * std::max(1.0, std::abs(kappa));
  for (auto& m : modes_) {
    if (std::abs(m.kappa - kappa) <= tol) {
      m.coeff += coeff;
      return;
    }
  }
  modes_.push_back({kappa, coeff});
}

void ZEnsemble::prune_modes() {
  double total = 0.0;
  for (const auto& m : modes_) total = std::max(total, m.coeff.cwiseAbs().maxCoeff());
  const double cut = total * 1e-14;
  std::vector<Mode> kept;
  kept.reserve(modes_.size());
  for (auto& m : modes_) {
    if (m.coeff.cwiseAbs().maxCoeff() > cut || std::abs(m.kappa) < 1e-12)
      kept.push_back(std::move(m));
  }
  modes_ = std::move(kept);
  std::sort(modes_.begin(), modes_.end(),
            [](const Mode& a, const Mode& b) { return a.kappa < b.kappa; });
}

void ZEnsemble::apply_gradient(double area) {
  if (area == 0.0) return;
  const double k_grad = gamma_ * area;  // rad/m per unit coherence order
  if (backend_ == EnsembleBackend::Harmonic) {
    std::vector<Mode> old = std::move(modes_);
    modes_.clear();
    for (const auto& m : old) {
      // element (r,c) of a mode at kappa moves to kappa - k_grad * q_rc
      for (int q = -2; q <= 2; ++q) {
        Mat4 part = Mat4::Zero();
        bool any = false;
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c)
            if (coherence_order(r, c) == q && m.coeff(r, c) != Complex(0.0, 0.0)) {
              part(r, c) = m.coeff(r, c);
              any = true;
            }
        if (any) add_mode(m.kappa - k_grad * q, part);
      }
    }
    prune_modes();
  } else {
    static const int m[4] = {1, 0, 0, -1};
    for (auto& s : slices_) {
      const double phi = k_grad * s.z;
      Mat4 u = Mat4::Zero();
      for (int i = 0; i < 4; ++i) u(i, i) = std::exp(Complex(0.0, -phi * m[i]));
      s.rho = u * s.rho * u.adjoint();
    }
  }
}

void ZEnsemble::diffuse(double d_coeff, double t) {
  if (d_coeff < 0.0 || t < 0.0) throw PhysicsError("diffuse: D and t must be >= 0");
  if (d_coeff == 0.0 || t == 0.0) return;
  if (backend_ == EnsembleBackend::Harmonic ||
      diffusion_mode_ == DiffusionMode::Analytic) {
    if (backend_ != EnsembleBackend::Harmonic)
      throw SimulationError("analytic diffusion requires the harmonic backend");
    for (auto& m : modes_)
      m.coeff *= std::exp(-d_coeff * m.kappa * m.kappa * t);
  } else {
    const double sigma = std::sqrt(2.0 * d_coeff * t);
    for (auto& s : slices_) {
      std::normal_distribution<double> step(0.0, sigma);
      s.z += step(s.rng);
    }
  }
}

void ZEnsemble::symmetrize() {
  if (backend_ == EnsembleBackend::Harmonic) {
    // Hermiticity of the ensemble couples +kappa and -kappa modes; repair the
    // uniform mode only (wound modes are conjugate pairs by construction)
    for (auto& m : modes_)
      if (std::abs(m.kappa) < 1e-12)
        m.coeff = 0.5 * (m.coeff + m.coeff.adjoint()).eval();
  } else {
    for (auto& s : slices_) s.rho = 0.5 * (s.rho + s.rho.adjoint()).eval();
  }
}

double ZEnsemble::max_herm_drift() const {
  double drift = 0.0;
  if (backend_ == EnsembleBackend::Harmonic) {
    for (const auto& m : modes_)
      if (std::abs(m.kappa) < 1e-12)
        drift = std::max(drift, herm_deviation(m.coeff));
  } else {
    for (const auto& s : slices_) drift = std::max(drift, herm_deviation(s.rho));
  }
  return drift;
}

DensityOperator ZEnsemble::mean() const {
  Mat4 acc = Mat4::Zero();
  if (backend_ == EnsembleBackend::Harmonic) {
    for (const auto& m : modes_)
      if (std::abs(m.kappa) < 1e-12) acc += m.coeff;
  } else {
    for (const auto& s : slices_) acc += s.rho;
    acc /= static_cast<double>(slices_.size());
  }
  return DensityOperator(0.5 * (acc + acc.adjoint()).eval());
}

}  // namespace lls
