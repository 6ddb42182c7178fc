#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lls/spin_core.hpp"

namespace lls {

// Resonance condition of the {T0,S0} two-level subspace: the CPMG echo
// spacing tau = 1/(2 nu_eff) steps the state by 2 theta per echo, so n1
// echoes invert and n2 echoes give a pi/2 rotation.
struct ResonanceParams {
  double theta = 0.0;   // rad, in (0, pi/2)
  double nu_eff = 0.0;  // Hz
  double tau = 0.0;     // s
  int n1 = 0;
  int n2 = 0;
};

// throws PhysicsError for omega = 0 (no singlet-triplet coupling) and for the
// J = D edge (theta = pi/2, echo counts collapse)
ResonanceParams resonance_params(const SpinSystem& sys);

// ---------------------------------------------------------------------------
// pulse programs
// ---------------------------------------------------------------------------

enum class LockMode { None, Ideal, Waltz16 };

// flip and phase are kept in degrees, matching the text form of the pulse
// language bit for bit; the engine converts when it builds the rotation
struct PulseEvent {
  double flip_deg;
  double phase_deg;
};
struct DelayEvent {
  double t;  // s
};
struct CpmgEvent {
  double tau;  // s
  int n;
  bool composite = false;
};
struct GradientEvent {
  double area;  // effective area, T s / m
  bool bipolar = false;
};
struct LockEvent {
  LockMode mode = LockMode::Ideal;
  double t = 0.0;
};
// storage interval; this is the duration the lifetime experiments sweep
struct StoreEvent {
  double t = 0.0;
  LockMode lock = LockMode::None;
};
struct AcquireEvent {};

using Event = std::variant<PulseEvent, DelayEvent, CpmgEvent, GradientEvent,
                           LockEvent, StoreEvent, AcquireEvent>;

struct PulseProgram {
  std::vector<Event> events;
  std::string label;

  double total_duration() const;
  // durations non-negative, at most one acquire and only as the last event
  void validate() const;
  PulseProgram& append(Event e) {
    events.push_back(std::move(e));
    return *this;
  }
};

// n repetitions of (tau/2 - pi - tau/2); the composite flag replaces the pi
// pulse by 90x-180y-90x
PulseProgram cpmg(double tau, int n, bool composite = false);

struct SpoilSettings {
  double sample_length = 0.01;  // m
  // Spoil areas are integer multiples of the minimum full-dephasing area
  // 2 pi / (gamma L). Distinct winding counts at different spoil points keep
  // spoiled coherences from being refocused by a later spoil through a
  // coherence-order flip.
  int windings = 10;
  int purge_windings = 17;

  double area(double gamma) const {
    return windings * kTwoPi / (gamma * sample_length);
  }
  double purge_area(double gamma) const {
    return purge_windings * kTwoPi / (gamma * sample_length);
  }
};

// magnetization-to-singlet sequence and its reverse readout
PulseProgram m2s(const SpinSystem& sys, const SpoilSettings& spoil = {});
PulseProgram s2m(const SpinSystem& sys, const SpoilSettings& spoil = {});

// Carravetta-Levitt preparation and readout for the weakly coupled phase.
// Delay defaults come from 1/(4J)- and 1/(4 Omega)-scale arguments and are
// verified numerically against the singlet-order contract at first use; a
// grid refinement over the two echo delays runs if the contract fails.
struct ClTiming {
  double d1 = 0.0;  // first echo delay
  double d2 = 0.0;  // second echo delay
  double dc = 0.0;  // zero-quantum quarter-period
  double achieved_order = 0.0;   // |singlet order| reached from rho0, max 2
  bool contract_met = false;     // achieved >= 0.95 * 2
  bool regime_warning = false;   // |J/Omega| above threshold
};

ClTiming resolve_cl_timing(const SpinSystem& sys, double regime_threshold = 0.2);

PulseProgram cl_prepare(const SpinSystem& sys);
// ends at anti-phase magnetization; follow with spin_echo_conversion() to get
// the in-phase difference signal
PulseProgram cl_read(const SpinSystem& sys);
PulseProgram spin_echo_conversion(const SpinSystem& sys);

// STELLAR hybrid: bipolar encode, M2S preparation in the oriented phase,
// locked storage across the transition, CL readout in the isotropic phase,
// bipolar decode and spin-echo conversion.
struct StellarOptions {
  double storage_s = 0.0;
  LockMode lock = LockMode::Ideal;
  SpoilSettings spoil{};
  // simulates a miswired second decode lobe: the pair's net area cancels and
  // the stored grating is never unwound
  bool decode_polarity_error = false;
};

PulseProgram stellar(const SpinSystem& sys_pop, const SpinSystem& sys_ip,
                     double grad_area, const StellarOptions& opts = {});

// pi - t - pi/2 - acquire, one program per recovery delay
std::vector<PulseProgram> inversion_recovery(const std::vector<double>& t_list);

// ---------------------------------------------------------------------------
// pulse-language text form
// ---------------------------------------------------------------------------

// grammar (one event per line, '#' comments):
//   pulse <flip_deg> <phase: x|y|-x|-y|deg>
//   delay <seconds>
//   cpmg tau=<s> n=<int> [composite]
//   grad area=<T*s/m> [bipolar]
//   lock mode=<ideal|waltz16> t=<s>
//   store t=<s> [lock=<mode>]
//   acquire
struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(int l, int c, const std::string& what)
      : std::runtime_error("line " + std::to_string(l) + ":" +
                           std::to_string(c) + ": " + what),
        line(l),
        column(c) {}
};

PulseProgram parse_program(const std::string& text);
std::string serialize_program(const PulseProgram& prog);

}  // namespace lls
