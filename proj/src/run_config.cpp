#include "lls/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace lls {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& path) {
  RunConfig cfg;
  cfg.raw_text = text;
  cfg.path = path;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": empty section name");
      cfg.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": key outside a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.sections[section][key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections.find(section);
  return s != sections.end() && s->second.count(key) > 0;
}

std::string RunConfig::get(const std::string& section, const std::string& key) const {
  if (!has(section, key))
    throw ConfigError("config: missing [" + section + "] " + key);
  return sections.at(section).at(key);
}

std::string RunConfig::get_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double RunConfig::get_double(const std::string& section, const std::string& key) const {
  const std::string v = get(section, key);
  size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " is not a number");
  }
  if (pos != v.size())
    throw ConfigError("config: [" + section + "] " + key + " is not a number");
  return out;
}

double RunConfig::get_double_or(const std::string& section, const std::string& key,
                                double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

int RunConfig::get_int_or(const std::string& section, const std::string& key,
                          int fallback) const {
  if (!has(section, key)) return fallback;
  const double v = get_double(section, key);
  return static_cast<int>(v);
}

std::vector<double> RunConfig::get_list(const std::string& section,
                                        const std::string& key) const {
  std::string v = get(section, key);
  for (auto& c : v)
    if (c == ',') c = ' ';
  std::istringstream in(v);
  std::vector<double> out;
  double x;
  while (in >> x) out.push_back(x);
  if (out.empty())
    throw ConfigError("config: [" + section + "] " + key + " is an empty grid");
  return out;
}

SpinSystem RunConfig::system() const {
  SpinSystem s;
  s.omega = get_double("system", "omega_hz");
  s.j = get_double("system", "j_hz");
  s.d = get_double_or("system", "d_hz", 0.0);
  s.gamma = get_double_or("system", "gamma", kGammaProton);
  s.label = get_or("system", "label", "");
  s.validate();
  return s;
}

std::optional<SpinSystem> RunConfig::system_ip() const {
  if (!sections.count("system_ip")) return std::nullopt;
  SpinSystem s = system();
  s.omega = get_double_or("system_ip", "omega_hz", s.omega);
  s.j = get_double_or("system_ip", "j_hz", s.j);
  s.d = 0.0;
  return s;
}

std::optional<PhaseSchedule> RunConfig::schedule() const {
  if (!sections.count("schedule")) return std::nullopt;
  OrderParameterMap map;
  const double t_c = get_double_or("schedule", "t_c_k", 302.0);
  const double beta = get_double_or("schedule", "beta", 0.2);
  const double d_max = get_double_or("schedule", "d_max_hz", 1600.0);
  if (has("schedule", "table")) {
    const std::string path = get("schedule", "table");
    std::ifstream in(path);
    if (!in) throw ConfigError("schedule table not found: " + path);
    std::vector<std::pair<double, double>> tab;
    double t, s;
    while (in >> t >> s) tab.emplace_back(t, s);
    if (tab.size() < 2) throw ConfigError("schedule table needs >= 2 rows");
    for (size_t i = 0; i + 1 < tab.size(); ++i) {
      if (!(tab[i].first < tab[i + 1].first))
        throw ConfigError("schedule table temperatures must increase");
      if (tab[i].second < tab[i + 1].second)
        throw ConfigError("schedule table order parameter must not increase");
    }
    map.t_c = t_c;
    map.d_max = d_max;
    map.table = tab;
  } else {
    const double t_ref = get_double_or("schedule", "t_ref_k", 294.0);
    const double d_ref = get_double_or("schedule", "d_ref_hz", 640.0);
    map = OrderParameterMap::calibrated(t_c, beta, d_max, t_ref, d_ref);
  }
  const double t0 = get_double("schedule", "t_start_k");
  const double t1 = get_double("schedule", "t_end_k");
  const double ramp = get_double_or("schedule", "ramp_s", 0.0);
  const std::string shape = get_or("schedule", "shape", "linear");
  PhaseSchedule sched;
  if (ramp > 0.0) {
    sched = transition_ramp(t0, t1, ramp,
                            shape == "sigmoid" ? RampShape::Sigmoid
                                               : RampShape::Linear,
                            map);
  } else {
    sched = PhaseSchedule::constant(t1, map);
    sched.t_start_k = t0;
  }
  return sched;
}

}  // namespace lls
