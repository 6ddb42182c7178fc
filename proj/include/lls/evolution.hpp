#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lls/spin_core.hpp"

namespace lls {

enum class ChannelKind {
  ExchangeSymmetricDipolar,
  UncorrelatedRandomField,
  CorrelatedRandomField,
};

// One dissipation channel: rate times a sum of double-commutator dissipators,
//   D(rho) = sum_G  G rho G† - 1/2 {G†G, rho}.
// Exchange-symmetric kinds are checked against P G P = G at construction.
struct RelaxationChannel {
  ChannelKind kind;
  double rate = 0.0;  // s^-1
  std::vector<Mat4> generators;

  static RelaxationChannel exchange_symmetric_dipolar(double rate);
  static RelaxationChannel uncorrelated_random_field(double rate);
  static RelaxationChannel correlated_random_field(double rate);
  static RelaxationChannel custom(ChannelKind kind, double rate,
                                  std::vector<Mat4> generators);
};

// unitary for free evolution, U = exp(-i H t), via eigendecomposition
Mat4 evolution_unitary(const Mat4& h, double t);

// hard nonselective pulse, R = exp(-i flip (I1_phi + I2_phi))
Mat4 pulse_unitary(double flip, double phase);

// rho' = U rho U† for U = exp(-iHt); t >= 0, H Hermitian
DensityOperator evolve_coherent(const DensityOperator& rho, const Mat4& h, double t);

// instantaneous ideal pulse on both spins
DensityOperator apply_pulse(const DensityOperator& rho, double flip, double phase);

// Liouvillian of d(rho)/dt = -i[H,rho] + sum_c rate_c sum_G (G rho G† - 1/2{G†G,rho})
// acting on column-stacked rho
Mat16 liouvillian(const Mat4& h, const std::vector<RelaxationChannel>& channels);

// exp(L t); exact per constant segment
Mat16 dissipative_propagator(const Mat4& h,
                             const std::vector<RelaxationChannel>& channels,
                             double t);

struct DissipativeOptions {
  // dissipators act on the deviation from this state, so inversion recovery
  // relaxes back to the thermal deviation instead of saturating
  Mat4 rho_eq = I1z() + I2z();
  bool relax_to_equilibrium = true;
};

DensityOperator evolve_dissipative(const DensityOperator& rho, const Mat4& h,
                                   const std::vector<RelaxationChannel>& channels,
                                   double t,
                                   const DissipativeOptions& opts = {});

// fixed-step 4th-order reference integrator for the same master equation;
// used by the step-halving cross-checks
DensityOperator evolve_dissipative_rk4(const DensityOperator& rho, const Mat4& h,
                                       const std::vector<RelaxationChannel>& channels,
                                       double t, double dt,
                                       const DissipativeOptions& opts = {});

// applies the propagator as an affine map around rho_eq
Mat4 apply_propagator(const Mat16& prop, const Mat4& rho, const Mat4& rho_eq,
                      bool relax_to_equilibrium);

// ---------------------------------------------------------------------------
// z-ensemble
// ---------------------------------------------------------------------------

enum class EnsembleBackend {
  // spatial-harmonic decomposition: exact gradient bookkeeping, the ensemble
  // mean keeps only the unwound (kappa = 0) component
  Harmonic,
  // explicit slices on a uniform z grid with per-slice RNG streams
  MonteCarlo,
};

enum class DiffusionMode { Analytic, MonteCarlo };

// Ensemble of density operators distributed along the sample z axis.
// Gradients imprint exp(-i gamma area z (I1z+I2z)) per slice; diffusion either
// attenuates the harmonics analytically or displaces slice positions.
class ZEnsemble {
 public:
  ZEnsemble() = default;  // empty ensemble; use the factories below

  static ZEnsemble harmonic(const DensityOperator& rho0, double gamma,
                            double length_m);
  static ZEnsemble monte_carlo(const DensityOperator& rho0, double gamma,
                               double length_m, int n_slices, uint64_t seed);

  EnsembleBackend backend() const { return backend_; }
  double gamma() const { return gamma_; }
  double length() const { return length_; }
  int slice_count() const;

  void apply_unitary(const Mat4& u);
  void apply_propagator(const Mat16& prop, const Mat4& rho_eq,
                        bool relax_to_equilibrium);
  // z-dependent phase imprint; area in T s / m
  void apply_gradient(double area);
  // D in m^2/s; analytic mode multiplies each harmonic by exp(-D kappa^2 t),
  // Monte Carlo mode displaces each slice by a Gaussian step of variance 2Dt
  void diffuse(double d_coeff, double t);
  void symmetrize();
  double max_herm_drift() const;

  // unweighted ensemble mean; in the harmonic backend the spatial mean keeps
  // only kappa = 0 (any wound component averages to zero over the sample)
  DensityOperator mean() const;
  double signal(const Mat4& obs) const { return expectation(mean(), obs); }

  void set_diffusion_mode(DiffusionMode m) { diffusion_mode_ = m; }
  DiffusionMode diffusion_mode() const { return diffusion_mode_; }

 private:
  struct Mode {
    double kappa;  // rad/m
    Mat4 coeff;
  };
  struct Slice {
    double z;
    Mat4 rho;
    std::mt19937_64 rng;
  };

  EnsembleBackend backend_ = EnsembleBackend::Harmonic;
  DiffusionMode diffusion_mode_ = DiffusionMode::Analytic;
  double gamma_ = kGammaProton;
  double length_ = 0.01;
  std::vector<Mode> modes_;
  std::vector<Slice> slices_;

  void add_mode(double kappa, const Mat4& coeff);
  void prune_modes();
};

}  // namespace lls
