#include <doctest.h>

#include "lls/experiments.hpp"

using namespace lls;

namespace {
const SpinSystem kIp{46.6, 3.1, 0.0};
const SpinSystem kPop{46.6, 3.1, 640.0};
}  // namespace

TEST_CASE("explicit WALTZ-16 lock sustains the singlet like the ideal lock") {
  // weakly coupled pair: without a lock the chemical shift mixes the singlet
  // strongly; the composite train has to suppress that mixing
  const DensityOperator stored(singlet_order_op());
  auto survived = [&](LockMode mode) {
    PulseProgram p;
    p.append(StoreEvent{0.25, mode});
    RunContext ctx;
    ctx.sys = kIp;
    ctx.waltz_nu1 = 2000.0;
    const ZEnsemble init = ZEnsemble::harmonic(stored, kIp.gamma, 0.01);
    const RunResult r = run_program(init, p, ctx, {});
    return r.final_state.signal(singlet_order_op());
  };
  const double ideal = survived(LockMode::Ideal);
  const double waltz = survived(LockMode::Waltz16);
  const double none = survived(LockMode::None);
  CHECK(ideal == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(waltz - ideal) < 0.05 * std::abs(ideal));
  // and it has to beat free evolution by a wide margin
  CHECK(std::abs(waltz - ideal) < 0.2 * std::abs(none - ideal));
}

TEST_CASE("waltz lock keeps running under relaxation") {
  PulseProgram p;
  p.append(StoreEvent{0.05, LockMode::Waltz16});
  RunContext ctx;
  ctx.sys = kIp;
  ctx.rates = RateSchedule::constant(
      {RelaxationChannel::uncorrelated_random_field(0.5)});
  const ZEnsemble init =
      ZEnsemble::harmonic(DensityOperator(singlet_order_op()), kIp.gamma, 0.01);
  const RunResult r = run_program(init, p, ctx, {});
  const double v = r.final_state.signal(singlet_order_op());
  // decays toward the uncorrelated-field rate without blowing up
  CHECK(v > 0.0);
  CHECK(v < 2.0);
}

TEST_CASE("halving the schedule resolution changes observables below 1e-6") {
  PhaseSchedule ramp = transition_ramp(
      294.0, 305.0, 0.5, RampShape::Linear,
      OrderParameterMap::calibrated(302.0, 0.2, 1600.0, 294.0, 640.0));
  PulseProgram p;
  p.append(StoreEvent{0.6, LockMode::Ideal});

  auto run_at = [&](double resolution) {
    RunContext ctx;
    ctx.sys = kPop;
    ctx.sys_ip = kIp;
    ctx.schedule = ramp;
    ctx.resolution = resolution;
    const ZEnsemble init = ZEnsemble::harmonic(
        DensityOperator(singlet_order_op()), kPop.gamma, 0.01);
    const RunResult r = run_program(init, p, ctx, {});
    return r.final_state.signal(singlet_order_op());
  };
  const double coarse = run_at(1e-3);
  const double fine = run_at(0.5e-3);
  CHECK(std::abs(coarse - fine) < 1e-6);
}

TEST_CASE("programs longer than the schedule horizon are rejected") {
  PhaseSchedule sched = PhaseSchedule::constant(305.0);
  sched.horizon_s = 1.0;
  PulseProgram p;
  p.append(StoreEvent{2.0, LockMode::None});
  RunContext ctx;
  ctx.sys = kIp;
  ctx.schedule = sched;
  const ZEnsemble init =
      ZEnsemble::harmonic(thermal_deviation(), kIp.gamma, 0.01);
  CHECK_THROWS_AS(run_program(init, p, ctx, {}), SimulationError);
}

TEST_CASE("trajectory times are strictly increasing through pulses") {
  PulseProgram p;
  p.append(PulseEvent{90.0, 90.0});
  p.append(PulseEvent{90.0, 0.0});
  p.append(DelayEvent{1e-3});
  p.append(PulseEvent{180.0, 0.0});
  RunContext ctx;
  ctx.sys = kPop;
  TrajectoryRequest req;
  req.names = {"sig"};
  req.observables = {I1x() + I2x()};
  const ZEnsemble init =
      ZEnsemble::harmonic(thermal_deviation(), kPop.gamma, 0.01);
  const RunResult r = run_program(init, p, ctx, req);
  for (size_t i = 0; i + 1 < r.trajectory.times.size(); ++i)
    CHECK(r.trajectory.times[i] < r.trajectory.times[i + 1]);
}

TEST_CASE("hermiticity drift is tracked and repaired") {
  PulseProgram p;
  const ResonanceParams rp = resonance_params(kPop);
  p.append(PulseEvent{90.0, 90.0});
  p.append(CpmgEvent{rp.tau, rp.n1, false});
  RunContext ctx;
  ctx.sys = kPop;
  const ZEnsemble init =
      ZEnsemble::harmonic(thermal_deviation(), kPop.gamma, 0.01);
  const RunResult r = run_program(init, p, ctx, {});
  CHECK(r.max_herm_drift < 1e-12);
  CHECK(herm_deviation(r.final_state.mean().mat) < 1e-14);
}
