#include "lls/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "lls/evolution.hpp"

namespace lls {

ResonanceParams resonance_params(const SpinSystem& sys) {
  sys.validate();
  if (sys.omega == 0.0)
    throw PhysicsError(
        "resonance_params: no singlet-triplet coupling (omega = 0)");
  if (sys.j == sys.d)
    throw PhysicsError(
        "resonance_params: J = D edge, theta = pi/2 and the echo counts "
        "collapse to zero");
  ResonanceParams p;
  p.theta = std::atan2(std::abs(sys.omega), std::abs(sys.j - sys.d));
  p.nu_eff = std::hypot(sys.omega, sys.j - sys.d);
  p.tau = 1.0 / (2.0 * p.nu_eff);
  p.n1 = static_cast<int>(std::lround(kPi / (2.0 * p.theta)));
  p.n2 = static_cast<int>(std::lround(kPi / (4.0 * p.theta)));
  if (p.n1 < 1) p.n1 = 1;
  if (p.n2 < 1) p.n2 = 1;
  return p;
}

// ---------------------------------------------------------------------------
// programs
// ---------------------------------------------------------------------------

namespace {

struct DurationVisitor {
  double operator()(const PulseEvent&) const { return 0.0; }
  double operator()(const DelayEvent& e) const { return e.t; }
  double operator()(const CpmgEvent& e) const { return e.tau * e.n; }
  double operator()(const GradientEvent&) const { return 0.0; }
  double operator()(const LockEvent& e) const { return e.t; }
  double operator()(const StoreEvent& e) const { return e.t; }
  double operator()(const AcquireEvent&) const { return 0.0; }
};

}  // namespace

double PulseProgram::total_duration() const {
  double t = 0.0;
  for (const auto& e : events) t += std::visit(DurationVisitor{}, e);
  return t;
}

void PulseProgram::validate() const {
  int acquires = 0;
  for (size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (std::visit(DurationVisitor{}, e) < 0.0)
      throw ParseError(static_cast<int>(i + 1), 1, "negative duration");
    if (std::holds_alternative<CpmgEvent>(e) && std::get<CpmgEvent>(e).n < 1)
      throw PhysicsError("PulseProgram: cpmg repetition count must be >= 1");
    if (std::holds_alternative<AcquireEvent>(e)) {
      ++acquires;
      if (acquires > 1)
        throw PhysicsError("PulseProgram: more than one acquire");
      if (i + 1 != events.size())
        throw PhysicsError("PulseProgram: acquire must be the last event");
    }
  }
}

PulseProgram cpmg(double tau, int n, bool composite) {
  if (!(tau > 0.0)) throw PhysicsError("cpmg: tau must be positive");
  if (n < 1) throw PhysicsError("cpmg: n must be >= 1");
  PulseProgram p;
  p.label = "cpmg";
  p.append(CpmgEvent{tau, n, composite});
  return p;
}

PulseProgram m2s(const SpinSystem& sys, const SpoilSettings& spoil) {
  const ResonanceParams rp = resonance_params(sys);
  PulseProgram p;
  p.label = "m2s";
  p.append(PulseEvent{90.0, 90.0});             // (pi/2)_y
  p.append(CpmgEvent{rp.tau, rp.n1, false});
  p.append(PulseEvent{90.0, 0.0});              // (pi/2)_x
  p.append(DelayEvent{rp.tau / 2});
  p.append(CpmgEvent{rp.tau, rp.n2, false});
  p.append(GradientEvent{spoil.area(sys.gamma), false});
  return p;
}

PulseProgram s2m(const SpinSystem& sys, const SpoilSettings& spoil) {
  const ResonanceParams rp = resonance_params(sys);
  PulseProgram p;
  p.label = "s2m";
  // purge recovered longitudinal magnetization, then the event-reversed m2s
  p.append(PulseEvent{90.0, 90.0});
  p.append(GradientEvent{spoil.purge_area(sys.gamma), false});
  p.append(CpmgEvent{rp.tau, rp.n2, false});
  p.append(DelayEvent{rp.tau / 2});
  p.append(PulseEvent{90.0, 0.0});
  p.append(CpmgEvent{rp.tau, rp.n1, false});
  return p;
}

// ---------------------------------------------------------------------------
// Carravetta-Levitt timing
// ---------------------------------------------------------------------------

namespace {

double cl_singlet_order(const SpinSystem& sys, double d1, double d2, double dc) {
  const Mat4 h = hamiltonian(sys);
  DensityOperator rho = thermal_deviation();
  rho = apply_pulse(rho, kPi / 2, 0.0);
  rho = evolve_coherent(rho, h, d1);
  rho = apply_pulse(rho, kPi, kPi / 2);
  rho = evolve_coherent(rho, h, d2);
  rho = apply_pulse(rho, kPi / 2, kPi / 2);
  rho = evolve_coherent(rho, h, dc);
  return expectation(rho, singlet_order_op());
}

struct ClKey {
  double omega, j, d;
  bool operator<(const ClKey& o) const {
    return std::tie(omega, j, d) < std::tie(o.omega, o.j, o.d);
  }
};

}  // namespace

ClTiming resolve_cl_timing(const SpinSystem& sys, double regime_threshold) {
  static std::map<ClKey, ClTiming> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find({sys.omega, sys.j, sys.d});
    if (it != cache.end()) return it->second;
  }

  if (sys.j == 0.0 || sys.omega == 0.0)
    throw PhysicsError("resolve_cl_timing: needs J != 0 and omega != 0");

  ClTiming t;
  t.regime_warning = std::abs(sys.j / sys.omega) > regime_threshold ||
                     std::abs(sys.d) > std::abs(sys.omega);
  const double nu_eff = std::hypot(sys.omega, sys.j - sys.d);
  // asymmetric echo: d1+d2 sets the J evolution, d1-d2 the shift-difference
  // rotation from sum to difference magnetization
  const double base1 = 1.0 / (4.0 * std::abs(sys.j)) + 1.0 / (4.0 * std::abs(sys.omega));
  const double base2 = 1.0 / (4.0 * std::abs(sys.j)) - 1.0 / (4.0 * std::abs(sys.omega));
  t.d1 = base1;
  t.d2 = std::max(base2, 0.0);
  t.dc = 1.0 / (4.0 * nu_eff);
  t.achieved_order = std::abs(cl_singlet_order(sys, t.d1, t.d2, t.dc));

  const double ceiling = 2.0;  // unitary bound for |<S0 order>| from rho0
  if (t.achieved_order < 0.95 * ceiling) {
    // grid refinement over the two echo delays, coarse to fine
    double best1 = t.d1, best2 = t.d2, best = t.achieved_order;
    double w1 = 0.5 * t.d1, w2 = 0.5 * std::max(t.d2, t.d1 * 0.25);
    for (int level = 0; level < 4; ++level) {
      for (int i = -6; i <= 6; ++i) {
        for (int k = -6; k <= 6; ++k) {
          const double c1 = best1 + w1 * i / 6.0;
          const double c2 = best2 + w2 * k / 6.0;
          if (c1 <= 0.0 || c2 < 0.0) continue;
          const double v = std::abs(cl_singlet_order(sys, c1, c2, t.dc));
          if (v > best) {
            best = v;
            best1 = c1;
            best2 = c2;
          }
        }
      }
      w1 /= 6.0;
      w2 /= 6.0;
    }
    t.d1 = best1;
    t.d2 = best2;
    t.achieved_order = best;
  }
  t.contract_met = t.achieved_order >= 0.95 * 2.0;

  std::lock_guard<std::mutex> lk(mu);
  cache[{sys.omega, sys.j, sys.d}] = t;
  return t;
}

PulseProgram cl_prepare(const SpinSystem& sys) {
  const ClTiming t = resolve_cl_timing(sys);
  PulseProgram p;
  p.label = "cl_prepare";
  p.append(PulseEvent{90.0, 0.0});    // (pi/2)_x
  p.append(DelayEvent{t.d1});
  p.append(PulseEvent{180.0, 90.0});  // pi_y
  p.append(DelayEvent{t.d2});
  p.append(PulseEvent{90.0, 90.0});   // (pi/2)_y
  p.append(DelayEvent{t.dc});
  return p;
}

PulseProgram cl_read(const SpinSystem& sys) {
  const ClTiming t = resolve_cl_timing(sys);
  PulseProgram p;
  p.label = "cl_read";
  p.append(DelayEvent{t.dc});
  p.append(PulseEvent{90.0, 0.0});  // (pi/2)_x, lands on anti-phase
  return p;
}

PulseProgram spin_echo_conversion(const SpinSystem& sys) {
  if (sys.j == 0.0) throw PhysicsError("spin_echo_conversion: needs J != 0");
  const double d = 1.0 / (4.0 * std::abs(sys.j));
  PulseProgram p;
  p.label = "spin_echo_conversion";
  p.append(DelayEvent{d});
  p.append(PulseEvent{180.0, 0.0});
  p.append(DelayEvent{d});
  return p;
}

PulseProgram stellar(const SpinSystem& sys_pop, const SpinSystem& sys_ip,
                     double grad_area, const StellarOptions& opts) {
  const ResonanceParams rp = resonance_params(sys_pop);
  PulseProgram p;
  p.label = "stellar";
  if (rp.theta < kPi / 4) {
    // strongly mixed oriented phase: magnetization-to-singlet echo trains
    p.append(PulseEvent{90.0, 90.0});
    p.append(GradientEvent{grad_area, true});  // encode
    p.append(CpmgEvent{rp.tau, rp.n1, false});
    p.append(PulseEvent{90.0, 0.0});
    p.append(DelayEvent{rp.tau / 2});
    p.append(CpmgEvent{rp.tau, rp.n2, false});
  } else {
    // weak mixing: the echo-train transfer degenerates, prepare as in the
    // weakly coupled sequence instead
    const ClTiming tp = resolve_cl_timing(sys_pop);
    p.append(PulseEvent{90.0, 0.0});
    p.append(GradientEvent{grad_area, true});  // encode
    p.append(DelayEvent{tp.d1});
    p.append(PulseEvent{180.0, 90.0});
    p.append(DelayEvent{tp.d2});
    p.append(PulseEvent{90.0, 90.0});
    p.append(DelayEvent{tp.dc});
  }
  p.append(GradientEvent{opts.spoil.area(sys_pop.gamma), false});
  p.append(StoreEvent{opts.storage_s, opts.lock});
  // CL readout in the isotropic phase
  const ClTiming t = resolve_cl_timing(sys_ip);
  p.append(DelayEvent{t.dc});
  p.append(PulseEvent{90.0, 0.0});
  // decode; a polarity error on the second lobe cancels the pair's net area
  p.append(GradientEvent{opts.decode_polarity_error ? 0.0 : grad_area, true});
  const double dj = 1.0 / (4.0 * std::abs(sys_ip.j));
  p.append(DelayEvent{dj});
  p.append(PulseEvent{180.0, 0.0});
  p.append(DelayEvent{dj});
  p.append(AcquireEvent{});
  return p;
}

std::vector<PulseProgram> inversion_recovery(const std::vector<double>& t_list) {
  std::vector<PulseProgram> out;
  out.reserve(t_list.size());
  for (double t : t_list) {
    if (t < 0.0) throw PhysicsError("inversion_recovery: negative delay");
    PulseProgram p;
    p.label = "inversion_recovery";
    p.append(PulseEvent{180.0, 0.0});
    p.append(StoreEvent{t, LockMode::None});
    p.append(PulseEvent{90.0, 90.0});
    p.append(AcquireEvent{});
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// parser / serializer
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string& s, int line, int col) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, col, "expected a number, got '" + s + "'");
  }
  if (pos != s.size())
    throw ParseError(line, col, "trailing characters in number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, int line, int col) {
  size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, col, "expected an integer, got '" + s + "'");
  }
  if (pos != s.size())
    throw ParseError(line, col, "trailing characters in integer '" + s + "'");
  return static_cast<int>(v);
}

// key=value token; returns {key, value}
std::pair<std::string, std::string> split_kv(const std::string& tok, int line,
                                             int col) {
  const size_t eq = tok.find('=');
  if (eq == std::string::npos)
    throw ParseError(line, col, "expected key=value, got '" + tok + "'");
  return {tok.substr(0, eq), tok.substr(eq + 1)};
}

double parse_phase(const std::string& s, int line, int col) {
  if (s == "x") return 0.0;
  if (s == "y") return 90.0;
  if (s == "-x") return 180.0;
  if (s == "-y") return 270.0;
  return parse_number(s, line, col);
}

LockMode parse_lock_mode(const std::string& s, int line, int col) {
  if (s == "ideal") return LockMode::Ideal;
  if (s == "waltz16") return LockMode::Waltz16;
  if (s == "none") return LockMode::None;
  throw ParseError(line, col, "unknown lock mode '" + s + "'");
}

const char* lock_mode_name(LockMode m) {
  switch (m) {
    case LockMode::Ideal: return "ideal";
    case LockMode::Waltz16: return "waltz16";
    case LockMode::None: return "none";
  }
  return "none";
}

}  // namespace

PulseProgram parse_program(const std::string& text) {
  PulseProgram prog;
  prog.label = "parsed";
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  bool saw_acquire = false;
  while (std::getline(in, raw)) {
    ++lineno;
    const size_t hash = raw.find('#');
    std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (saw_acquire)
      throw ParseError(lineno, 1, "event after acquire");
    const std::string& kw = toks[0];

    if (kw == "pulse") {
      if (toks.size() != 3)
        throw ParseError(lineno, 1, "pulse needs <flip_deg> <phase>");
      const double flip = parse_number(toks[1], lineno, 2);
      const double phase = parse_phase(toks[2], lineno, 3);
      prog.append(PulseEvent{flip, phase});
    } else if (kw == "delay") {
      if (toks.size() != 2) throw ParseError(lineno, 1, "delay needs <seconds>");
      const double t = parse_number(toks[1], lineno, 2);
      if (t < 0.0) throw ParseError(lineno, 2, "negative delay");
      prog.append(DelayEvent{t});
    } else if (kw == "cpmg") {
      CpmgEvent e{0.0, 0, false};
      bool have_tau = false, have_n = false;
      for (size_t i = 1; i < toks.size(); ++i) {
        if (toks[i] == "composite") {
          e.composite = true;
          continue;
        }
        const auto [k, v] = split_kv(toks[i], lineno, static_cast<int>(i + 1));
        if (k == "tau") {
          e.tau = parse_number(v, lineno, static_cast<int>(i + 1));
          have_tau = true;
        } else if (k == "n") {
          e.n = parse_int(v, lineno, static_cast<int>(i + 1));
          have_n = true;
        } else {
          throw ParseError(lineno, static_cast<int>(i + 1),
                           "unknown cpmg key '" + k + "'");
        }
      }
      if (!have_tau || !have_n)
        throw ParseError(lineno, 1, "cpmg needs tau=<s> n=<int>");
      if (e.tau <= 0.0) throw ParseError(lineno, 2, "cpmg tau must be positive");
      if (e.n < 1) throw ParseError(lineno, 2, "cpmg n must be >= 1");
      prog.append(e);
    } else if (kw == "grad") {
      GradientEvent e{0.0, false};
      bool have_area = false;
      for (size_t i = 1; i < toks.size(); ++i) {
        if (toks[i] == "bipolar") {
          e.bipolar = true;
          continue;
        }
        const auto [k, v] = split_kv(toks[i], lineno, static_cast<int>(i + 1));
        if (k == "area") {
          e.area = parse_number(v, lineno, static_cast<int>(i + 1));
          have_area = true;
        } else {
          throw ParseError(lineno, static_cast<int>(i + 1),
                           "unknown grad key '" + k + "'");
        }
      }
      if (!have_area) throw ParseError(lineno, 1, "grad needs area=<T*s/m>");
      prog.append(e);
    } else if (kw == "lock") {
      LockEvent e;
      bool have_t = false, have_mode = false;
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto [k, v] = split_kv(toks[i], lineno, static_cast<int>(i + 1));
        if (k == "mode") {
          e.mode = parse_lock_mode(v, lineno, static_cast<int>(i + 1));
          have_mode = true;
        } else if (k == "t") {
          e.t = parse_number(v, lineno, static_cast<int>(i + 1));
          have_t = true;
        } else {
          throw ParseError(lineno, static_cast<int>(i + 1),
                           "unknown lock key '" + k + "'");
        }
      }
      if (!have_t || !have_mode)
        throw ParseError(lineno, 1, "lock needs mode=<ideal|waltz16> t=<s>");
      if (e.t < 0.0) throw ParseError(lineno, 2, "negative lock duration");
      prog.append(e);
    } else if (kw == "store") {
      StoreEvent e;
      bool have_t = false;
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto [k, v] = split_kv(toks[i], lineno, static_cast<int>(i + 1));
        if (k == "t") {
          e.t = parse_number(v, lineno, static_cast<int>(i + 1));
          have_t = true;
        } else if (k == "lock") {
          e.lock = parse_lock_mode(v, lineno, static_cast<int>(i + 1));
        } else {
          throw ParseError(lineno, static_cast<int>(i + 1),
                           "unknown store key '" + k + "'");
        }
      }
      if (!have_t) throw ParseError(lineno, 1, "store needs t=<s>");
      if (e.t < 0.0) throw ParseError(lineno, 2, "negative store duration");
      prog.append(e);
    } else if (kw == "acquire") {
      if (toks.size() != 1) throw ParseError(lineno, 2, "acquire takes no arguments");
      prog.append(AcquireEvent{});
      saw_acquire = true;
    } else {
      throw ParseError(lineno, 1, "unknown event '" + kw + "'");
    }
  }
  prog.validate();
  return prog;
}

namespace {

std::string phase_text(double deg) {
  auto near = [&](double x) { return std::abs(deg - x) < 1e-9; };
  if (near(0.0)) return "x";
  if (near(90.0)) return "y";
  if (near(180.0)) return "-x";
  if (near(270.0)) return "-y";
  return format_double(deg);
}

struct SerializeVisitor {
  std::ostringstream& out;
  void operator()(const PulseEvent& e) const {
    out << "pulse " << format_double(e.flip_deg) << ' '
        << phase_text(e.phase_deg) << '\n';
  }
  void operator()(const DelayEvent& e) const {
    out << "delay " << format_double(e.t) << '\n';
  }
  void operator()(const CpmgEvent& e) const {
    out << "cpmg tau=" << format_double(e.tau) << " n=" << e.n;
    if (e.composite) out << " composite";
    out << '\n';
  }
  void operator()(const GradientEvent& e) const {
    out << "grad area=" << format_double(e.area);
    if (e.bipolar) out << " bipolar";
    out << '\n';
  }
  void operator()(const LockEvent& e) const {
    out << "lock mode=" << lock_mode_name(e.mode) << " t=" << format_double(e.t)
        << '\n';
  }
  void operator()(const StoreEvent& e) const {
    out << "store t=" << format_double(e.t);
    if (e.lock != LockMode::None) out << " lock=" << lock_mode_name(e.lock);
    out << '\n';
  }
  void operator()(const AcquireEvent&) const { out << "acquire\n"; }
};

}  // namespace

std::string serialize_program(const PulseProgram& prog) {
  std::ostringstream out;
  for (const auto& e : prog.events) std::visit(SerializeVisitor{out}, e);
  return out.str();
}

}  // namespace lls
