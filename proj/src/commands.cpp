#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "lls/run_config.hpp"

namespace lls {

namespace fs = std::filesystem;

namespace {

struct OutputWriter {
  fs::path dir;
  std::vector<std::pair<std::string, std::string>> files;  // name, content hash

  explicit OutputWriter(const std::string& d) : dir(d) {
    fs::create_directories(dir);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw SimulationError("cannot write output file: " + name);
    out << content;
    files.emplace_back(name, fnv1a64_hex(content));
  }

  void manifest(const RunConfig& cfg, uint64_t seed) {
    std::ostringstream m;
    m << "tool_version = " << kToolVersion << '\n';
    m << "config_path = " << cfg.path << '\n';
    m << "config_hash = " << fnv1a64_hex(cfg.raw_text) << '\n';
    m << "seed = " << seed << '\n';
    for (const auto& [name, hash] : files)
      m << "file " << name << " = " << hash << '\n';
    std::ofstream out(dir / "manifest.txt", std::ios::binary);
    out << m.str();
  }
};

RateSchedule resolve_rates(const RunConfig& cfg, const SpinSystem& sys,
                           const std::optional<SpinSystem>& sys_ip,
                           LifetimeKind kind, std::string* report) {
  const std::string mode = cfg.get_or("relaxation", "mode", "none");
  if (mode == "none") return RateSchedule::none();
  if (mode == "rates") {
    const double a = cfg.get_double_or("relaxation", "sym_rate", 0.0);
    const double b = cfg.get_double_or("relaxation", "unc_rate", 0.0);
    return RateSchedule::constant(
        {RelaxationChannel::exchange_symmetric_dipolar(a),
         RelaxationChannel::uncorrelated_random_field(b)});
  }
  if (mode != "calibrate")
    throw ConfigError("config: unknown relaxation mode '" + mode + "'");

  const RateTargets pop{cfg.get_double("relaxation", "t1_s"),
                        cfg.get_double("relaxation", "tlls_s")};
  const LifetimeKind pop_kind =
      (kind == LifetimeKind::LlsIp) ? LifetimeKind::LlsIp : LifetimeKind::LlsPop;
  const RateCalibration cal_pop = calibrate_rates_driver(pop, sys, pop_kind);
  std::ostringstream rep;
  rep << "pop_sym_rate = " << format_double(cal_pop.symmetric_dipolar_rate) << '\n'
      << "pop_unc_rate = " << format_double(cal_pop.uncorrelated_field_rate) << '\n'
      << "pop_achieved_t1 = " << format_double(cal_pop.achieved_t1) << '\n'
      << "pop_achieved_tlls = " << format_double(cal_pop.achieved_t_lls) << '\n';

  if (kind == LifetimeKind::TransPhase) {
    if (!cfg.has("relaxation", "ip_t1_s") || !cfg.has("relaxation", "ip_tlls_s"))
      throw ConfigError("transphase calibration needs ip_t1_s and ip_tlls_s");
    if (!sys_ip) throw ConfigError("transphase calibration needs [system_ip]");
    const RateTargets ip{cfg.get_double("relaxation", "ip_t1_s"),
                         cfg.get_double("relaxation", "ip_tlls_s")};
    const RateCalibration cal_ip =
        calibrate_rates_driver(ip, *sys_ip, LifetimeKind::LlsIp);
    rep << "ip_sym_rate = " << format_double(cal_ip.symmetric_dipolar_rate) << '\n'
        << "ip_unc_rate = " << format_double(cal_ip.uncorrelated_field_rate) << '\n'
        << "ip_achieved_t1 = " << format_double(cal_ip.achieved_t1) << '\n'
        << "ip_achieved_tlls = " << format_double(cal_ip.achieved_t_lls) << '\n';
    if (report) *report += rep.str();
    return RateSchedule::per_phase(cal_pop.channels(), cal_ip.channels());
  }
  if (report) *report += rep.str();
  return RateSchedule::constant(cal_pop.channels());
}

LifetimeKind parse_kind(const std::string& kind) {
  if (kind == "t1") return LifetimeKind::T1;
  if (kind == "lls-pop") return LifetimeKind::LlsPop;
  if (kind == "lls-ip") return LifetimeKind::LlsIp;
  if (kind == "transphase") return LifetimeKind::TransPhase;
  throw ConfigError("config: unknown experiment kind '" + kind + "'");
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream out;
  out << "time";
  for (const auto& n : t.names) out << ',' << n;
  out << '\n';
  for (size_t i = 0; i < t.times.size(); ++i) {
    out << format_double(t.times[i]);
    for (const auto& col : t.values) out << ',' << format_double(col[i]);
    out << '\n';
  }
  return out.str();
}

int run_lifetime_command(const RunConfig& cfg, const CliOptions& opts,
                         OutputWriter& out, uint64_t seed, std::string& text) {
  const LifetimeKind kind = parse_kind(cfg.get("experiment", "kind"));
  LifetimeSettings s;
  s.kind = kind;
  s.sys = cfg.system();
  s.sys_ip = cfg.system_ip();
  s.schedule = cfg.schedule();
  s.storage_times = cfg.get_list("experiment", "storage_times_s");
  s.sample_length = cfg.get_double_or("ensemble", "length_m", 0.01);
  s.seed = seed;
  s.noise_sigma = cfg.get_double_or("experiment", "noise_sigma", 0.0);
  s.threads = opts.threads;

  std::string rate_report;
  s.rates = resolve_rates(cfg, s.sys, s.sys_ip, kind, &rate_report);
  if (kind == LifetimeKind::TransPhase && !s.schedule)
    throw ConfigError("transphase experiment needs a [schedule] section");

  const ExperimentCurve curve = run_lifetime_experiment(s);
  out.write("curve.csv", curve.to_csv());

  if (cfg.get_or("output", "write_trajectory", "false") == "true") {
    // sampled run at the longest storage value, overlap with the state chain
    RunContext ctx;
    ctx.sys = s.sys;
    ctx.sys_ip = s.sys_ip;
    ctx.schedule = s.schedule;
    ctx.rates = s.rates;
    TrajectoryRequest req;
    for (int k = 1; k <= 5; ++k) {
      req.names.push_back("rho" + std::to_string(k));
      req.observables.push_back(0.5 * rho_k_target(k));
    }
    const ZEnsemble init = ZEnsemble::harmonic(thermal_deviation(), s.sys.gamma,
                                               s.sample_length);
    const RunResult r = run_program(
        init, lifetime_program(s, s.storage_times.back()), ctx, req);
    out.write("trajectory.csv", trajectory_csv(r.trajectory));
  }

  std::ostringstream rep;
  rep << rate_report;
  if (kind == LifetimeKind::T1) {
    const FitResult fit = fit_inversion_recovery(curve.control, curve.signal);
    rep << fit_report(fit, {"m0", "t1_s"});
  } else {
    const FitResult fit = fit_monoexponential(curve.control, curve.signal);
    rep << fit_report(fit, {"amplitude", "lifetime_s"});
  }
  out.write("fit.txt", rep.str());
  text = rep.str();
  return kExitOk;
}

int run_diffusion_command(const RunConfig& cfg, const CliOptions& opts,
                          OutputWriter& out, uint64_t seed, std::string& text) {
  const std::string kind = cfg.get("experiment", "kind");
  DiffusionExperimentSettings s;
  s.kind = kind == "diffusion-ste" ? DiffusionKind::Ste : DiffusionKind::Lls;
  s.sys = cfg.system();
  s.gradients = cfg.get_list("experiment", "gradients_tpm");
  s.base.delta = cfg.get_double_or("experiment", "delta_s", 320e-6);
  s.base.big_delta = cfg.get_double("experiment", "big_delta_s");
  s.base.shape_factor =
      cfg.get_double_or("experiment", "shape_factor", 2.0 / kPi);
  s.base.coherence_order = cfg.get_int_or("experiment", "coherence_order", 1);
  s.base.gamma = s.sys.gamma;
  s.d_true = cfg.get_double("experiment", "diffusion_coeff");
  s.locked_storage = s.sys.d == 0.0;
  s.sample_length = cfg.get_double_or("ensemble", "length_m", 0.01);
  s.n_slices = cfg.get_int_or("experiment", "nz", 10000);
  s.seed = seed;
  s.threads = opts.threads;
  const std::string backend = cfg.get_or("experiment", "backend", "analytic");
  if (backend == "mc" || backend == "monte-carlo") {
    s.backend = DiffusionBackend::MonteCarlo;
    if (!cfg.has("experiment", "seed") && !opts.seed)
      throw ConfigError("Monte Carlo backend needs a seed");
  } else if (backend == "analytic") {
    s.backend = DiffusionBackend::Analytic;
  } else {
    throw ConfigError("config: unknown diffusion backend '" + backend + "'");
  }

  const ExperimentCurve curve = run_diffusion_experiment(s);
  out.write("curve.csv", curve.to_csv());

  std::vector<double> kappas;
  for (double g : s.gradients) {
    DiffusionSettings ds = s.base;
    ds.g = g;
    kappas.push_back(ds.kappa());
  }
  const FitResult fit =
      fit_gaussian_attenuation(kappas, curve.signal, s.base.big_delta);
  const std::string rep = fit_report(fit, {"diffusion_coeff"});
  out.write("fit.txt", rep);
  text = rep;
  return kExitOk;
}

}  // namespace

int cmd_params(const CliOptions& opts, std::string& out_text) {
  try {
    const RunConfig cfg = RunConfig::load(opts.config_path);
    const SpinSystem sys = cfg.system();
    std::ostringstream out;
    try {
      const ResonanceParams p = resonance_params(sys);
      out << "theta_rad = " << format_double(p.theta) << '\n';
      out << "nu_eff_hz = " << format_double(p.nu_eff) << '\n';
      out << "tau_s = " << format_double(p.tau) << '\n';
      out << "n1 = " << p.n1 << '\n';
      out << "n2 = " << p.n2 << '\n';
    } catch (const PhysicsError& e) {
      out_text = std::string("physics error: ") + e.what() + "\n";
      return kExitPhysics;
    }
    Eigen::SelfAdjointEigenSolver<Mat4> es(hamiltonian_st_basis(sys));
    out << "eigenvalues_hz =";
    for (int i = 0; i < 4; ++i)
      out << ' ' << format_double(es.eigenvalues()(i) / kTwoPi);
    out << '\n';
    out_text = out.str();
    return kExitOk;
  } catch (const ConfigError& e) {
    out_text = std::string("config error: ") + e.what() + "\n";
    return kExitConfig;
  }
}

int cmd_run(const CliOptions& opts, std::string& out_text) {
  std::unique_ptr<OutputWriter> writer;
  try {
    const RunConfig cfg = RunConfig::load(opts.config_path);
    const uint64_t seed = opts.seed ? *opts.seed
                                    : static_cast<uint64_t>(cfg.get_int_or(
                                          "experiment", "seed", 1));
    const std::string dir =
        opts.out_dir ? *opts.out_dir : cfg.get_or("output", "dir", "out");
    if (opts.format != "csv")
      throw ConfigError("unsupported output format '" + opts.format + "'");
    writer = std::make_unique<OutputWriter>(dir);

    const std::string kind = cfg.get("experiment", "kind");
    int rc;
    if (kind == "diffusion-ste" || kind == "diffusion-lls")
      rc = run_diffusion_command(cfg, opts, *writer, seed, out_text);
    else
      rc = run_lifetime_command(cfg, opts, *writer, seed, out_text);
    writer->manifest(cfg, seed);
    return rc;
  } catch (const ConfigError& e) {
    out_text = std::string("config error: ") + e.what() + "\n";
    return kExitConfig;
  } catch (const PhysicsError& e) {
    out_text = std::string("physics error: ") + e.what() + "\n";
    return kExitPhysics;
  } catch (const std::exception& e) {
    out_text = std::string("simulation error: ") + e.what() + "\n";
    if (writer) {
      try {
        writer->write("diagnostics.txt", out_text);
      } catch (...) {
      }
    }
    return kExitSimulation;
  }
}

int cmd_parse(const std::string& file_path, std::string& out_text) {
  try {
    std::ifstream in(file_path);
    if (!in) throw ConfigError("cannot open program file: " + file_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const PulseProgram prog = parse_program(buf.str());
    std::ostringstream out;
    out << serialize_program(prog);
    out << "# total_duration_s = " << format_double(prog.total_duration())
        << '\n';
    out_text = out.str();
    return kExitOk;
  } catch (const ParseError& e) {
    out_text = std::string("parse error: ") + e.what() + "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    out_text = std::string("error: ") + e.what() + "\n";
    return kExitConfig;
  }
}

int cmd_calibrate(const CliOptions& opts, std::string& out_text) {
  try {
    const RunConfig cfg = RunConfig::load(opts.config_path);
    const SpinSystem sys = cfg.system();
    const std::string kind_s = cfg.get_or("experiment", "kind", "lls-pop");
    const LifetimeKind kind = parse_kind(kind_s);
    std::string report;
    resolve_rates(cfg, sys, cfg.system_ip(), kind, &report);
    if (report.empty())
      throw ConfigError("calibrate needs relaxation mode = calibrate");
    out_text = report;
    if (opts.out_dir) {
      OutputWriter writer(*opts.out_dir);
      writer.write("calibration.txt", report);
      writer.manifest(cfg, opts.seed ? *opts.seed : 0);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    out_text = std::string("config error: ") + e.what() + "\n";
    return kExitConfig;
  } catch (const PhysicsError& e) {
    out_text = std::string("physics error: ") + e.what() + "\n";
    return kExitPhysics;
  } catch (const std::exception& e) {
    out_text = std::string("simulation error: ") + e.what() + "\n";
    return kExitSimulation;
  }
}

}  // namespace lls
