#include "lls/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

namespace lls {

void ExperimentCurve::validate() const {
  if (control.size() != signal.size())
    throw SimulationError("ExperimentCurve: length mismatch");
  for (size_t i = 0; i + 1 < control.size(); ++i)
    if (!(control[i] < control[i + 1]))
      throw SimulationError("ExperimentCurve: control values must increase");
}

std::string ExperimentCurve::to_csv() const {
  std::ostringstream out;
  out << "control,signal";
  if (noise_sigma) out << ",sigma";
  out << '\n';
  for (size_t i = 0; i < control.size(); ++i) {
    out << format_double(control[i]) << ',' << format_double(signal[i]);
    if (noise_sigma) out << ',' << format_double(*noise_sigma);
    out << '\n';
  }
  return out.str();
}

StickSpectrum stick_spectrum(const DensityOperator& rho, const Mat4& h,
                             double amplitude_floor) {
  if (!is_hermitian(h, 1e-10))
    throw PhysicsError("stick_spectrum: Hamiltonian not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat4> es(h);
  Mat4 v = es.eigenvectors();
  // fix eigenvector phases for determinism: largest component real positive
  for (int c = 0; c < 4; ++c) {
    int imax = 0;
    for (int r = 1; r < 4; ++r)
      if (std::abs(v(r, c)) > std::abs(v(imax, c))) imax = r;
    const Complex ph = v(imax, c) / std::abs(v(imax, c));
    v.col(c) /= ph;
  }
  const Mat4 mplus = raising_op(1) + raising_op(2);
  const Mat4 rho_e = v.adjoint() * rho.mat * v;
  const Mat4 m_e = v.adjoint() * mplus * v;
  StickSpectrum spec;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      // coherence rho_ij beats at (E_i - E_j)/2pi and is detected through the
      // conjugate element of I+
      const Complex amp = rho_e(i, j) * m_e(j, i);
      if (std::abs(amp) < amplitude_floor) continue;
      spec.lines.push_back(
          {(es.eigenvalues()(i) - es.eigenvalues()(j)) / kTwoPi, amp.real()});
    }
  }
  std::sort(spec.lines.begin(), spec.lines.end(),
            [](const StickLine& a, const StickLine& b) {
              return a.frequency < b.frequency;
            });
  return spec;
}

// ---------------------------------------------------------------------------
// experiment drivers
// ---------------------------------------------------------------------------

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

PulseProgram lifetime_program(const LifetimeSettings& s, double storage) {
  SpoilSettings spoil;
  spoil.sample_length = s.sample_length;
  switch (s.kind) {
    case LifetimeKind::T1: {
      PulseProgram p;
      p.label = "inversion_recovery";
      p.append(PulseEvent{180.0, 0.0});
      p.append(StoreEvent{storage, LockMode::None});
      p.append(PulseEvent{90.0, 90.0});
      p.append(AcquireEvent{});
      return p;
    }
    case LifetimeKind::LlsPop: {
      PulseProgram p = m2s(s.sys, spoil);
      p.label = "m2s_store_s2m";
      p.append(StoreEvent{storage, LockMode::None});
      const PulseProgram read = s2m(s.sys, spoil);
      p.events.insert(p.events.end(), read.events.begin(), read.events.end());
      p.append(AcquireEvent{});
      return p;
    }
    case LifetimeKind::LlsIp: {
      PulseProgram p = cl_prepare(s.sys);
      p.label = "cl_store_cl";
      SpoilSettings cl_spoil = spoil;
      cl_spoil.windings = 23;
      p.append(GradientEvent{cl_spoil.area(s.sys.gamma), false});
      p.append(StoreEvent{storage, LockMode::Ideal});
      const PulseProgram read = cl_read(s.sys);
      p.events.insert(p.events.end(), read.events.begin(), read.events.end());
      const PulseProgram conv = spin_echo_conversion(s.sys);
      p.events.insert(p.events.end(), conv.events.begin(), conv.events.end());
      p.append(AcquireEvent{});
      return p;
    }
    case LifetimeKind::TransPhase: {
      if (!s.sys_ip) throw ConfigError("transphase experiment needs sys_ip");
      StellarOptions opts;
      opts.storage_s = storage;
      opts.lock = LockMode::Ideal;
      opts.spoil = spoil;
      opts.decode_polarity_error = s.stellar_decode_polarity_error;
      double area = s.stellar_grad_area;
      if (area <= 0.0) {
        SpoilSettings filt;
        filt.sample_length = s.sample_length;
        filt.windings = 8;
        area = filt.area(s.sys.gamma);
      }
      return stellar(s.sys, *s.sys_ip, area, opts);
    }
  }
  throw ConfigError("unknown lifetime kind");
}

namespace {

Mat4 lifetime_observable(LifetimeKind kind) {
  switch (kind) {
    case LifetimeKind::T1:
    case LifetimeKind::LlsPop:
      return I1x() + I2x();
    case LifetimeKind::LlsIp:
    case LifetimeKind::TransPhase:
      return I1y() - I2y();
  }
  return I1x() + I2x();
}

}  // namespace

ExperimentCurve run_lifetime_experiment(const LifetimeSettings& s) {
  if (s.storage_times.empty())
    throw ConfigError("lifetime experiment: empty storage grid");
  for (size_t i = 0; i + 1 < s.storage_times.size(); ++i)
    if (!(s.storage_times[i] < s.storage_times[i + 1]))
      throw ConfigError("lifetime experiment: storage times must increase");

  RunContext ctx;
  ctx.sys = s.sys;
  ctx.sys_ip = s.sys_ip;
  ctx.schedule = s.schedule;
  ctx.rates = s.rates;

  // Unlocked storage leaves a small coherent residue precessing at nu_eff;
  // synchronizing the storage interval to whole precession periods makes the
  // readout phase storage-independent, like phase-locking the experiment.
  std::vector<double> times = s.storage_times;
  if (s.kind == LifetimeKind::LlsPop) {
    const double period = 1.0 / resonance_params(s.sys).nu_eff;
    for (auto& t : times)
      if (t > 0.0) t = std::ceil(t / period - 1e-9) * period;
  }

  const Mat4 obs = lifetime_observable(s.kind);
  ExperimentCurve curve;
  curve.kind = "lifetime";
  curve.seed = s.seed;
  curve.control = times;
  curve.signal.resize(times.size());

  // Relaxation regrows magnetization during the readout train itself, adding
  // a storage-independent offset to the acquired signal. A reference run from
  // the zero deviation isolates that source term so it can be subtracted,
  // standing in for the phase cycle of the measured experiment.
  const bool subtract_baseline =
      s.kind != LifetimeKind::T1 && ctx.has_relaxation();

  parallel_for(static_cast<int>(times.size()), s.threads, [&](int i) {
    const PulseProgram prog = lifetime_program(s, times[i]);
    RunContext point_ctx = ctx;
    if (s.kind == LifetimeKind::TransPhase && point_ctx.schedule) {
      // heater timed so Tc is crossed at the synchronization fraction; the
      // preparation happens in the oriented phase regardless
      PhaseSchedule sched = *point_ctx.schedule;
      const double prep_len = m2s(s.sys).total_duration();
      PhaseSchedule probe = sched;
      probe.t_heat_start = 0.0;
      const double t_x_rel = probe.transition_time().value_or(0.0);
      // crossing at prep + fraction * storage, heater never before the prep
      sched.t_heat_start = std::max(
          prep_len, prep_len + s.transition_fraction * times[i] - t_x_rel);
      point_ctx.schedule = sched;
    }
    TrajectoryRequest req;
    req.names = {"signal"};
    req.observables = {obs};
    const ZEnsemble init = ZEnsemble::harmonic(thermal_deviation(), s.sys.gamma,
                                               s.sample_length);
    const RunResult r = run_program(init, prog, point_ctx, req);
    if (!r.acquired) throw SimulationError("lifetime experiment: no acquire");
    double value = *r.acquired;
    if (subtract_baseline) {
      const ZEnsemble zero = ZEnsemble::harmonic(
          DensityOperator(Mat4::Zero()), s.sys.gamma, s.sample_length);
      const RunResult rz = run_program(zero, prog, point_ctx, req);
      value -= *rz.acquired;
    }
    curve.signal[i] = value;
  });

  if (s.noise_sigma > 0.0) {
    curve.noise_sigma = s.noise_sigma;
    for (size_t i = 0; i < curve.signal.size(); ++i) {
      std::mt19937_64 rng(mix_seed(s.seed, i));
      std::normal_distribution<double> noise(0.0, s.noise_sigma);
      curve.signal[i] += noise(rng);
    }
  }
  curve.validate();
  return curve;
}

// ---------------------------------------------------------------------------
// diffusion
// ---------------------------------------------------------------------------

namespace {

// encode -> store (population or singlet order) -> decode, returning the
// acquired signal; shared by both backends
double diffusion_signal(const DiffusionExperimentSettings& s, double g,
                        double d_coeff, uint64_t point_seed) {
  DiffusionSettings ds = s.base;
  ds.g = g;
  ds.gamma = s.sys.gamma;
  const double area = ds.effective_area();

  SpoilSettings spoil;
  spoil.sample_length = s.sample_length;

  PulseProgram p;
  const bool lls = s.kind == DiffusionKind::Lls;
  if (!lls) {
    // stimulated echo: transverse helix stored as a population grating
    p.label = "ste_diffusion";
    p.append(PulseEvent{90.0, 90.0});
    p.append(GradientEvent{area, true});
    p.append(PulseEvent{90.0, 90.0});
    p.append(GradientEvent{spoil.area(s.sys.gamma), false});
    p.append(StoreEvent{ds.big_delta, LockMode::None});
    p.append(PulseEvent{90.0, 90.0});
    p.append(GradientEvent{area, true});
    p.append(AcquireEvent{});
  } else if (!s.locked_storage) {
    // singlet storage via M2S in the oriented phase
    p.label = "lls_diffusion_pop";
    PulseProgram prep = m2s(s.sys, spoil);
    p.append(prep.events[0]);
    p.append(GradientEvent{area, true});
    p.events.insert(p.events.end(), prep.events.begin() + 1, prep.events.end());
    p.append(StoreEvent{ds.big_delta, LockMode::None});
    const PulseProgram read = s2m(s.sys, spoil);
    p.events.insert(p.events.end(), read.events.begin(), read.events.end());
    p.append(GradientEvent{area, true});
    p.append(AcquireEvent{});
  } else {
    // CL storage with ideal lock in the isotropic phase
    p.label = "lls_diffusion_ip";
    PulseProgram prep = cl_prepare(s.sys);
    p.append(prep.events[0]);
    p.append(GradientEvent{area, true});
    p.events.insert(p.events.end(), prep.events.begin() + 1, prep.events.end());
    p.append(GradientEvent{spoil.area(s.sys.gamma), false});
    p.append(StoreEvent{ds.big_delta, LockMode::Ideal});
    const PulseProgram read = cl_read(s.sys);
    p.events.insert(p.events.end(), read.events.begin(), read.events.end());
    p.append(GradientEvent{area, true});
    const PulseProgram conv = spin_echo_conversion(s.sys);
    p.events.insert(p.events.end(), conv.events.begin(), conv.events.end());
    p.append(AcquireEvent{});
  }

  // diffusion acts during the storage interval
  RunContext ctx;
  ctx.sys = s.sys;
  const Mat4 obs = lls && s.locked_storage ? Mat4(I1y() - I2y())
                                           : Mat4(I1x() + I2x());
  TrajectoryRequest req;
  req.names = {"signal"};
  req.observables = {obs};

  ZEnsemble init =
      s.backend == DiffusionBackend::Analytic
          ? ZEnsemble::harmonic(thermal_deviation(), s.sys.gamma, s.sample_length)
          : ZEnsemble::monte_carlo(thermal_deviation(), s.sys.gamma,
                                   s.sample_length, s.n_slices, point_seed);

  // run up to the store event, diffuse, then finish
  PulseProgram head, tail;
  bool seen_store = false;
  StoreEvent store{};
  for (const auto& e : p.events) {
    if (!seen_store && std::holds_alternative<StoreEvent>(e)) {
      store = std::get<StoreEvent>(e);
      seen_store = true;
      continue;
    }
    (seen_store ? tail : head).events.push_back(e);
  }
  RunResult r1 = run_program(init, head, ctx, {});
  ZEnsemble mid = std::move(r1.final_state);
  // The storage Hamiltonian is z independent, so coherent storage and the
  // spatial diffusion kernel commute and can be applied in sequence.
  {
    PulseProgram st;
    st.append(StoreEvent{store.t, store.lock});
    RunResult r2 = run_program(mid, st, ctx, {});
    mid = std::move(r2.final_state);
    mid.diffuse(d_coeff, store.t);
  }
  RunResult r3 = run_program(mid, tail, ctx, req);
  if (!r3.acquired) throw SimulationError("diffusion experiment: no acquire");
  return *r3.acquired;
}

}  // namespace

ExperimentCurve run_diffusion_experiment(const DiffusionExperimentSettings& s) {
  if (s.gradients.empty())
    throw ConfigError("diffusion experiment: empty gradient grid");
  if (s.d_true < 0.0) throw ConfigError("diffusion experiment: D must be >= 0");

  ExperimentCurve curve;
  curve.kind = s.kind == DiffusionKind::Ste ? "diffusion_ste" : "diffusion_lls";
  curve.seed = s.seed;
  curve.control = s.gradients;
  curve.signal.resize(s.gradients.size());

  // Each point is normalized by the zero-diffusion run at the same gradient:
  // the stimulated-echo pathway amplitude cancels and the ratio is the pure
  // Gaussian attenuation exp(-D kappa^2 Delta).
  parallel_for(static_cast<int>(s.gradients.size()), s.threads, [&](int i) {
    const uint64_t ps = mix_seed(s.seed, i);
    const double sig = diffusion_signal(s, s.gradients[i], s.d_true, ps);
    const double ref = diffusion_signal(s, s.gradients[i], 0.0, ps);
    if (std::abs(ref) < 1e-12)
      throw SimulationError("diffusion experiment: vanishing reference signal");
    curve.signal[i] = sig / ref;
  });
  curve.validate();
  return curve;
}

std::vector<double> lifetime_storage_grid(double expected_lifetime) {
  std::vector<double> grid;
  for (double f : {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0})
    grid.push_back(f * expected_lifetime);
  return grid;
}

RateCalibration calibrate_rates_driver(const RateTargets& targets,
                                       const SpinSystem& sys, LifetimeKind kind,
                                       double tolerance, int threads) {
  if (kind == LifetimeKind::T1 || kind == LifetimeKind::TransPhase)
    throw ConfigError("calibrate_rates_driver: kind must be lls-pop or lls-ip");
  const StorageMode mode = kind == LifetimeKind::LlsIp
                               ? StorageMode::IdealLock
                               : StorageMode::FreeEvolution;
  RateCalibration cal = calibrate_rates(targets, sys, mode, tolerance);

  auto driver_fits = [&](double a, double b, double* t1, double* t_lls) {
    const RateSchedule rates = RateSchedule::constant(
        {RelaxationChannel::exchange_symmetric_dipolar(a),
         RelaxationChannel::uncorrelated_random_field(b)});
    LifetimeSettings lls;
    lls.kind = kind;
    lls.sys = sys;
    lls.rates = rates;
    lls.storage_times = lifetime_storage_grid(targets.t_lls);
    lls.threads = threads;
    const ExperimentCurve curve = run_lifetime_experiment(lls);
    *t_lls = fit_monoexponential(curve.control, curve.signal).params[1];

    LifetimeSettings ir;
    ir.kind = LifetimeKind::T1;
    ir.sys = sys;
    ir.rates = rates;
    ir.storage_times = {0.0};
    for (double f : {0.3, 0.6, 0.9, 1.3, 1.8, 2.4, 3.2, 4.5})
      ir.storage_times.push_back(f * targets.t1);
    ir.threads = threads;
    const ExperimentCurve rec = run_lifetime_experiment(ir);
    *t1 = fit_inversion_recovery(rec.control, rec.signal).params[1];
  };

  double a = cal.symmetric_dipolar_rate;
  double b = cal.uncorrelated_field_rate;
  double t1 = 0.0, t_lls = 0.0;
  for (int round = 0; round < 8; ++round) {
    driver_fits(a, b, &t1, &t_lls);
    ++cal.evaluations;
    const bool ok1 = std::abs(t1 - targets.t1) <= 0.5 * tolerance * targets.t1;
    const bool ok2 =
        std::abs(t_lls - targets.t_lls) <= 0.5 * tolerance * targets.t_lls;
    if (ok1 && ok2) break;
    // the fitted singlet lifetime scales inversely with b; the dipolar rate
    // moves 1/T1 by 2.25 per unit, so one secant step each converges fast
    b *= t_lls / targets.t_lls;
    a = std::max(0.0, a + (1.0 / targets.t1 - 1.0 / t1) / 2.25);
  }
  cal.symmetric_dipolar_rate = a;
  cal.uncorrelated_field_rate = b;
  cal.achieved_t1 = t1;
  cal.achieved_t_lls = t_lls;
  if (std::abs(t1 - targets.t1) > tolerance * targets.t1 ||
      std::abs(t_lls - targets.t_lls) > tolerance * targets.t_lls)
    throw SimulationError(
        "calibrate_rates_driver: did not converge to the targets");
  return cal;
}

std::string fit_report(const FitResult& fit, const std::vector<std::string>& names) {
  std::ostringstream out;
  for (size_t i = 0; i < names.size() && i < fit.params.size(); ++i) {
    out << names[i] << " = " << format_double(fit.params[i]) << '\n';
    out << names[i] << "_stderr = " << format_double(fit.stderrs[i]) << '\n';
  }
  out << "rss = " << format_double(fit.rss) << '\n';
  out << "iterations = " << fit.iterations << '\n';
  out << "converged = " << (fit.converged ? "true" : "false") << '\n';
  return out.str();
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lls
