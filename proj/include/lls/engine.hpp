#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lls/evolution.hpp"
#include "lls/sample_model.hpp"
#include "lls/sequence.hpp"

namespace lls {

// Relaxation channels per thermodynamic phase. During a schedule the active
// set switches at the Tc crossing; without a schedule the oriented-phase set
// is used throughout.
struct RateSchedule {
  std::vector<RelaxationChannel> pop;
  std::vector<RelaxationChannel> ip;

  static RateSchedule none() { return {}; }
  static RateSchedule constant(std::vector<RelaxationChannel> ch) {
    RateSchedule r;
    r.pop = ch;
    r.ip = std::move(ch);
    return r;
  }
  static RateSchedule per_phase(std::vector<RelaxationChannel> pop_ch,
                                std::vector<RelaxationChannel> ip_ch) {
    return {std::move(pop_ch), std::move(ip_ch)};
  }
};

struct RunContext {
  SpinSystem sys;                     // oriented-phase parameters
  std::optional<SpinSystem> sys_ip;   // isotropic-phase omega/J, if different
  std::optional<PhaseSchedule> schedule;  // absent: constant D = sys.d
  RateSchedule rates;
  Mat4 rho_eq = I1z() + I2z();
  bool relax_to_equilibrium = true;
  double resolution = 1e-3;   // piecewise-constant sampling of D(t), s
  double waltz_nu1 = 2000.0;  // RF amplitude of the explicit WALTZ-16 lock, Hz

  SpinSystem system_at(double t_abs) const;
  const std::vector<RelaxationChannel>& channels_at(double t_abs) const;
  bool has_relaxation() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // values[k][i], observable k

  void append(double t, const std::vector<double>& row);
};

struct TrajectoryRequest {
  std::vector<std::string> names;
  std::vector<Mat4> observables;
  // when positive, timed events are sampled at this spacing in addition to
  // event boundaries
  double oversample_dt = 0.0;
};

struct RunResult {
  Trajectory trajectory;
  ZEnsemble final_state;
  std::optional<double> acquired;  // first observable at the acquire event
  double max_herm_drift = 0.0;
};

// Executes the program against a z-ensemble. Observables are sampled at event
// boundaries (plus oversampling); the Hamiltonian during timed events follows
// D(t) from the schedule, and lock intervals suppress the chemical shift
// (ideal) or run the explicit WALTZ-16 train.
RunResult run_program(const ZEnsemble& initial, const PulseProgram& prog,
                      const RunContext& ctx, const TrajectoryRequest& req = {});

// single-density-matrix convenience wrapper (harmonic backend underneath)
RunResult run_program(const DensityOperator& rho0, const PulseProgram& prog,
                      const RunContext& ctx, const TrajectoryRequest& req = {});

}  // namespace lls
