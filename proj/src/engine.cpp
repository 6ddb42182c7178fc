#include "lls/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace lls {

SpinSystem RunContext::system_at(double t_abs) const {
  SpinSystem s = sys;
  if (schedule) {
    s.d = schedule->d_of(t_abs);
    if (schedule->in_isotropic_phase(t_abs) && sys_ip) {
      s.omega = sys_ip->omega;
      s.j = sys_ip->j;
    }
  }
  return s;
}

const std::vector<RelaxationChannel>& RunContext::channels_at(double t_abs) const {
  if (schedule && schedule->in_isotropic_phase(t_abs)) return rates.ip;
  return rates.pop;
}

bool RunContext::has_relaxation() const {
  auto any = [](const std::vector<RelaxationChannel>& ch) {
    for (const auto& c : ch)
      if (c.rate > 0.0) return true;
    return false;
  };
  return any(rates.pop) || any(rates.ip);
}

void Trajectory::append(double t, const std::vector<double>& row) {
  // instantaneous events re-sample at the same time; the post-event value
  // replaces the previous row so times stay strictly increasing
  if (!times.empty() && t <= times.back() + 1e-15) {
    for (size_t k = 0; k < row.size(); ++k) values[k].back() = row[k];
    return;
  }
  times.push_back(t);
  for (size_t k = 0; k < row.size(); ++k) values[k].push_back(row[k]);
}

namespace {

// WALTZ-16 phase-alternated composite block: flip multiples of 90 degrees
// with phase x or -x; the supercycle is Q, Qbar, Qbar, Q
struct WaltzElement {
  double flip;   // rad
  double phase;  // rad
};

std::vector<WaltzElement> waltz16_elements() {
  // Q = 270(-x) 360(x) 180(-x) 270(x) 90(-x) 180(x) 360(-x) 180(x) 270(-x)
  const std::array<std::pair<int, int>, 9> q = {{{3, 1},
                                                 {4, 0},
                                                 {2, 1},
                                                 {3, 0},
                                                 {1, 1},
                                                 {2, 0},
                                                 {4, 1},
                                                 {2, 0},
                                                 {3, 1}}};
  std::vector<WaltzElement> out;
  auto push_block = [&](bool invert) {
    for (const auto& [mult, bar] : q) {
      const bool minus = invert ? (bar == 0) : (bar == 1);
      out.push_back({mult * kPi / 2, minus ? kPi : 0.0});
    }
  };
  push_block(false);
  push_block(true);
  push_block(true);
  push_block(false);
  return out;
}

class Executor {
 public:
  Executor(ZEnsemble state, const RunContext& ctx, const TrajectoryRequest& req)
      : state_(std::move(state)), ctx_(ctx), req_(req) {
    result_.trajectory.names = req.names;
    result_.trajectory.values.resize(req.names.size());
  }

  RunResult run(const PulseProgram& prog) {
    prog.validate();
    if (ctx_.schedule && prog.total_duration() > ctx_.schedule->horizon_s)
      throw SimulationError("run_program: program exceeds the schedule horizon");
    sample();
    for (const auto& e : prog.events) std::visit(*this, e);
    result_.final_state = state_;
    result_.max_herm_drift = drift_;
    return std::move(result_);
  }

  void operator()(const PulseEvent& e) {
    state_.apply_unitary(pulse_unitary(e.flip_deg * kPi / 180.0,
                                       e.phase_deg * kPi / 180.0));
    after_step();
  }
  void operator()(const DelayEvent& e) { timed(e.t, LockMode::None); }
  void operator()(const CpmgEvent& e) {
    for (int i = 0; i < e.n; ++i) {
      timed(e.tau / 2, LockMode::None, /*sample_each=*/false);
      if (e.composite) {
        state_.apply_unitary(pulse_unitary(kPi / 2, 0.0));
        state_.apply_unitary(pulse_unitary(kPi, kPi / 2));
        state_.apply_unitary(pulse_unitary(kPi / 2, 0.0));
      } else {
        state_.apply_unitary(pulse_unitary(kPi, 0.0));
      }
      timed(e.tau / 2, LockMode::None, /*sample_each=*/false);
      after_step();
    }
  }
  void operator()(const GradientEvent& e) {
    state_.apply_gradient(e.area);
    after_step();
  }
  void operator()(const LockEvent& e) { timed(e.t, e.mode); }
  void operator()(const StoreEvent& e) { timed(e.t, e.lock); }
  void operator()(const AcquireEvent&) {
    if (!req_.observables.empty())
      result_.acquired = state_.signal(req_.observables.front());
    after_step();
  }

 private:
  using PropKey =
      std::tuple<double, double, double, bool, bool, double, double, double>;

  ZEnsemble state_;
  const RunContext& ctx_;
  const TrajectoryRequest& req_;
  RunResult result_;
  double t_abs_ = 0.0;
  double drift_ = 0.0;
  std::map<PropKey, Mat4> unitary_cache_;
  std::map<PropKey, Mat16> prop_cache_;

  void sample() {
    if (req_.observables.empty()) return;
    std::vector<double> row(req_.observables.size());
    const DensityOperator m = state_.mean();
    for (size_t k = 0; k < req_.observables.size(); ++k)
      row[k] = expectation(m, req_.observables[k]);
    result_.trajectory.append(t_abs_, row);
  }

  void after_step() {
    drift_ = std::max(drift_, state_.max_herm_drift());
    state_.symmetrize();
    sample();
  }

  bool relaxing_at(double t) const {
    for (const auto& c : ctx_.channels_at(t))
      if (c.rate > 0.0) return true;
    return false;
  }

  // one piecewise-constant segment at the local Hamiltonian
  void segment(double t_mid, double dt, LockMode lock, double rf_amp,
               double rf_phase) {
    SpinSystem s = ctx_.system_at(t_mid);
    if (lock != LockMode::None) s.omega = 0.0;
    Mat4 h = hamiltonian(s);
    if (rf_amp != 0.0)
      h += kTwoPi * rf_amp *
           ((I1x() + I2x()) * std::cos(rf_phase) +
            (I1y() + I2y()) * std::sin(rf_phase));
    const bool in_ip = ctx_.schedule && ctx_.schedule->in_isotropic_phase(t_mid);
    const PropKey key{s.omega, s.j,    s.d,   in_ip,
                      relaxing_at(t_mid), dt, rf_amp, rf_phase};
    if (!relaxing_at(t_mid)) {
      auto it = unitary_cache_.find(key);
      if (it == unitary_cache_.end())
        it = unitary_cache_.emplace(key, evolution_unitary(h, dt)).first;
      state_.apply_unitary(it->second);
    } else {
      auto it = prop_cache_.find(key);
      if (it == prop_cache_.end())
        it = prop_cache_
                 .emplace(key, dissipative_propagator(h, ctx_.channels_at(t_mid), dt))
                 .first;
      state_.apply_propagator(it->second, ctx_.rho_eq, ctx_.relax_to_equilibrium);
    }
  }

  // boundaries of piecewise-constant integration between t0 and t1: the
  // resolution grid, the Tc crossing, and oversampling points
  std::vector<double> segment_bounds(double t0, double t1) const {
    std::vector<double> cuts{t0, t1};
    const double ramp_begin =
        ctx_.schedule ? ctx_.schedule->t_heat_start : 0.0;
    const double ramp_end_abs =
        ctx_.schedule ? ramp_begin + ctx_.schedule->ramp_s : 0.0;
    const bool varying = ctx_.schedule && ctx_.schedule->ramp_s > 0.0 &&
                         t0 < ramp_end_abs && t1 > ramp_begin;
    if (varying) {
      const double step = std::max(ctx_.resolution, 1e-9);
      const double lo = std::max(t0, ramp_begin);
      const double hi = std::min(t1, ramp_end_abs);
      if (lo > t0) cuts.push_back(lo);
      for (double t = lo + step; t < hi; t += step) cuts.push_back(t);
      if (hi > t0 && hi < t1) cuts.push_back(hi);
    }
    if (ctx_.schedule) {
      const auto tx = ctx_.schedule->transition_time();
      if (tx && *tx > t0 && *tx < t1) cuts.push_back(*tx);
    }
    if (req_.oversample_dt > 0.0) {
      for (double t = t0 + req_.oversample_dt; t < t1; t += req_.oversample_dt)
        cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return b - a < 1e-12; }),
               cuts.end());
    return cuts;
  }

  void timed(double duration, LockMode lock, bool sample_each = true) {
    if (duration < 0.0) throw PhysicsError("run_program: negative duration");
    if (duration == 0.0) {
      if (sample_each) after_step();
      return;
    }
    if (lock == LockMode::Waltz16) {
      waltz_interval(duration);
      if (sample_each) after_step();
      return;
    }
    const double t_end = t_abs_ + duration;
    const auto cuts = segment_bounds(t_abs_, t_end);
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double dt = cuts[i + 1] - cuts[i];
      segment(0.5 * (cuts[i] + cuts[i + 1]), dt, lock, 0.0, 0.0);
      t_abs_ = cuts[i + 1];
      if (req_.oversample_dt > 0.0 && i + 2 < cuts.size()) sample();
    }
    t_abs_ = t_end;
    if (sample_each) after_step();
  }

  // explicit WALTZ-16 train: finite-amplitude elements interleaved with the
  // system evolution, one supercycle at a time
  void waltz_interval(double duration) {
    const auto elems = waltz16_elements();
    const double t_end = t_abs_ + duration;
    while (t_abs_ < t_end - 1e-12) {
      for (const auto& el : elems) {
        const double el_dur = el.flip / (kTwoPi * ctx_.waltz_nu1);
        const double dt = std::min(el_dur, t_end - t_abs_);
        if (dt <= 0.0) break;
        // lock element: RF field on, chemical shift retained (the train
        // itself does the averaging)
        segment(t_abs_ + 0.5 * dt, dt, LockMode::None, ctx_.waltz_nu1, el.phase);
        t_abs_ += dt;
        if (t_abs_ >= t_end - 1e-12) break;
      }
    }
    t_abs_ = t_end;
  }
};

}  // namespace

RunResult run_program(const ZEnsemble& initial, const PulseProgram& prog,
                      const RunContext& ctx, const TrajectoryRequest& req) {
  Executor ex(initial, ctx, req);
  return ex.run(prog);
}

RunResult run_program(const DensityOperator& rho0, const PulseProgram& prog,
                      const RunContext& ctx, const TrajectoryRequest& req) {
  const ZEnsemble ens =
      ZEnsemble::harmonic(rho0, ctx.sys.gamma, 0.01);
  return run_program(ens, prog, ctx, req);
}

}  // namespace lls
