#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lls/experiments.hpp"

namespace lls {

inline constexpr const char* kToolVersion = "0.1.0";

// Flat-sectioned key=value run description:
//   [system]     omega_hz, j_hz, d_hz, gamma, label
//   [system_ip]  omega_hz, j_hz                     (optional)
//   [schedule]   t_start_k, t_end_k, ramp_s, shape, t_c_k, beta, d_max_hz,
//                t_ref_k, d_ref_hz | table=<path>   (optional)
//   [relaxation] mode=none|rates|calibrate, sym_rate, unc_rate,
//                t1_s, tlls_s, ip_t1_s, ip_tlls_s
//   [experiment] kind, storage_times_s, gradients_tpm, delta_s, big_delta_s,
//                shape_factor, coherence_order, diffusion_coeff, backend,
//                nz, seed, noise_sigma
//   [ensemble]   length_m, nz
//   [output]     dir, write_trajectory
struct RunConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string raw_text;
  std::string path;

  static RunConfig load(const std::string& path);
  static RunConfig parse(const std::string& text, const std::string& path = "");

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const;
  int get_int_or(const std::string& section, const std::string& key,
                 int fallback) const;
  std::vector<double> get_list(const std::string& section,
                               const std::string& key) const;

  SpinSystem system() const;
  std::optional<SpinSystem> system_ip() const;
  std::optional<PhaseSchedule> schedule() const;
};

struct CliOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 1;
  std::string format = "csv";
};

// exit codes: 0 ok, 2 config error, 3 physics error, 4 simulation failure
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPhysics = 3;
inline constexpr int kExitSimulation = 4;

int cmd_params(const CliOptions& opts, std::string& out_text);
int cmd_run(const CliOptions& opts, std::string& out_text);
int cmd_parse(const std::string& file_path, std::string& out_text);
int cmd_calibrate(const CliOptions& opts, std::string& out_text);

}  // namespace lls
