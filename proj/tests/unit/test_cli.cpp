#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lls/run_config.hpp"

using namespace lls;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lls_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
  std::string read(const std::string& name) const {
    std::ifstream in(path / name);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }
};

const char* kParamsConfig =
    "[system]\n"
    "omega_hz = 46.6\n"
    "j_hz = 3.1\n"
    "d_hz = 640\n";

}  // namespace

TEST_CASE("config parsing essentials") {
  const RunConfig cfg = RunConfig::parse(
      "[system]\n"
      "omega_hz = 50   # comment\n"
      "j_hz=10\n"
      "[experiment]\n"
      "storage_times_s = 1, 2, 3.5\n");
  CHECK(cfg.get_double("system", "omega_hz") == 50.0);
  CHECK(cfg.get_double("system", "j_hz") == 10.0);
  CHECK(cfg.get_list("experiment", "storage_times_s") ==
        std::vector<double>{1.0, 2.0, 3.5});
  CHECK_THROWS_AS(cfg.get("system", "missing"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("key = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[s]\nnot a pair\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[s]\nx = abc\n").get_double("s", "x"),
                  ConfigError);
}

TEST_CASE("params command reports the resonance condition") {
  TempDir tmp;
  CliOptions opts;
  opts.config_path = tmp.file("run.cfg", kParamsConfig);
  std::string text;
  CHECK(cmd_params(opts, text) == kExitOk);
  CHECK(text.find("n1 = 22") != std::string::npos);
  CHECK(text.find("n2 = 11") != std::string::npos);
  CHECK(text.find("tau_s = 0.00078") != std::string::npos);
  CHECK(text.find("eigenvalues_hz =") != std::string::npos);
}

TEST_CASE("params command exit codes") {
  TempDir tmp;
  CliOptions opts;
  std::string text;

  opts.config_path = tmp.path / "absent.cfg";
  CHECK(cmd_params(opts, text) == kExitConfig);

  opts.config_path = tmp.file("bad.cfg", "[system]\nj_hz = 3.1\n");
  CHECK(cmd_params(opts, text) == kExitConfig);

  opts.config_path = tmp.file(
      "omega0.cfg", "[system]\nomega_hz = 0\nj_hz = 3.1\nd_hz = 640\n");
  CHECK(cmd_params(opts, text) == kExitPhysics);
  CHECK(text.find("singlet-triplet coupling") != std::string::npos);
}

TEST_CASE("run command writes curve, fit and manifest") {
  TempDir tmp;
  CliOptions opts;
  opts.config_path = tmp.file("run.cfg",
                              "[system]\n"
                              "omega_hz = 50\n"
                              "j_hz = 10\n"
                              "d_hz = 600\n"
                              "[relaxation]\n"
                              "mode = rates\n"
                              "sym_rate = 0.3\n"
                              "unc_rate = 0.12\n"
                              "[experiment]\n"
                              "kind = lls-pop\n"
                              "storage_times_s = 0.5 1.0 1.5 2.0 3.0 4.0\n"
                              "seed = 7\n"
                              "[output]\n"
                              "dir = unused\n");
  opts.out_dir = (tmp.path / "out").string();
  std::string text;
  REQUIRE(cmd_run(opts, text) == kExitOk);
  CHECK(fs::exists(tmp.path / "out" / "curve.csv"));
  CHECK(fs::exists(tmp.path / "out" / "fit.txt"));
  CHECK(fs::exists(tmp.path / "out" / "manifest.txt"));
  const std::string manifest = tmp.read("out/manifest.txt");
  CHECK(manifest.find("config_hash = ") != std::string::npos);
  CHECK(manifest.find("seed = 7") != std::string::npos);
  CHECK(manifest.find("file curve.csv = ") != std::string::npos);
  CHECK(manifest.find("file fit.txt = ") != std::string::npos);
  const std::string curve = tmp.read("out/curve.csv");
  CHECK(curve.rfind("control,signal", 0) == 0);
  CHECK(text.find("lifetime_s = ") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical output") {
  TempDir tmp;
  CliOptions opts;
  opts.config_path = tmp.file("run.cfg",
                              "[system]\n"
                              "omega_hz = 46.6\n"
                              "j_hz = 3.1\n"
                              "d_hz = 0\n"
                              "[experiment]\n"
                              "kind = diffusion-lls\n"
                              "gradients_tpm = 0.05 0.1 0.2 0.3 0.4\n"
                              "big_delta_s = 30\n"
                              "diffusion_coeff = 1.92e-10\n"
                              "backend = mc\n"
                              "nz = 400\n"
                              "seed = 11\n");
  std::string text;
  opts.out_dir = (tmp.path / "a").string();
  REQUIRE(cmd_run(opts, text) == kExitOk);
  opts.out_dir = (tmp.path / "b").string();
  opts.threads = 4;
  REQUIRE(cmd_run(opts, text) == kExitOk);
  CHECK(tmp.read("a/curve.csv") == tmp.read("b/curve.csv"));
  CHECK(tmp.read("a/curve.csv").size() > 20);
}

TEST_CASE("run command rejects an empty sweep grid") {
  TempDir tmp;
  CliOptions opts;
  opts.config_path = tmp.file("run.cfg",
                              "[system]\n"
                              "omega_hz = 50\n"
                              "j_hz = 10\n"
                              "d_hz = 600\n"
                              "[experiment]\n"
                              "kind = lls-pop\n"
                              "storage_times_s =\n");
  opts.out_dir = (tmp.path / "out").string();
  std::string text;
  CHECK(cmd_run(opts, text) == kExitConfig);
}

TEST_CASE("monte carlo run without a seed is a config error") {
  TempDir tmp;
  CliOptions opts;
  opts.config_path = tmp.file("run.cfg",
                              "[system]\n"
                              "omega_hz = 46.6\n"
                              "j_hz = 3.1\n"
                              "d_hz = 0\n"
                              "[experiment]\n"
                              "kind = diffusion-ste\n"
                              "gradients_tpm = 0.1 0.2 0.3 0.4\n"
                              "big_delta_s = 3.3\n"
                              "diffusion_coeff = 1.8e-10\n"
                              "backend = mc\n");
  opts.out_dir = (tmp.path / "out").string();
  std::string text;
  CHECK(cmd_run(opts, text) == kExitConfig);
}

TEST_CASE("parse command canonicalizes programs") {
  TempDir tmp;
  const std::string file = tmp.file("prog.pp",
                                    "# demo\n"
                                    "pulse 90 y\n"
                                    "delay 0.01\n"
                                    "cpmg tau=8.444e-4 n=19\n"
                                    "acquire\n");
  std::string text;
  REQUIRE(cmd_parse(file, text) == kExitOk);
  CHECK(text.find("pulse 90 y") != std::string::npos);
  CHECK(text.find("total_duration_s = ") != std::string::npos);

  const std::string bad = tmp.file("bad.pp", "delay -2\n");
  CHECK(cmd_parse(bad, text) == kExitConfig);
  CHECK(text.find("line 1") != std::string::npos);

  const std::string empty = tmp.file("empty.pp", "");
  REQUIRE(cmd_parse(empty, text) == kExitOk);
  CHECK(text.find("total_duration_s = 0") != std::string::npos);
}

TEST_CASE("serialized m2s reparses with the expected duration") {
  TempDir tmp;
  const SpinSystem sys{50.0, 10.0, 600.0};
  const PulseProgram prog = m2s(sys);
  const std::string file = tmp.file("m2s.pp", serialize_program(prog));
  std::string text;
  REQUIRE(cmd_parse(file, text) == kExitOk);
  const ResonanceParams rp = resonance_params(sys);
  const double expect = rp.n1 * rp.tau + rp.tau / 2 + rp.n2 * rp.tau;
  const PulseProgram echo = parse_program(text.substr(0, text.find("# total")));
  CHECK(echo.total_duration() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("calibrate command emits a rates report") {
  TempDir tmp;
  CliOptions opts;
  opts.config_path = tmp.file("cal.cfg",
                              "[system]\n"
                              "omega_hz = 46.6\n"
                              "j_hz = 3.1\n"
                              "d_hz = 640\n"
                              "[relaxation]\n"
                              "mode = calibrate\n"
                              "t1_s = 1.1\n"
                              "tlls_s = 3.7\n"
                              "[experiment]\n"
                              "kind = lls-pop\n");
  std::string text;
  REQUIRE(cmd_calibrate(opts, text) == kExitOk);
  CHECK(text.find("pop_sym_rate = ") != std::string::npos);
  CHECK(text.find("pop_achieved_tlls = 3.7") != std::string::npos);
}

TEST_CASE("schedule section builds a ramp") {
  const RunConfig cfg = RunConfig::parse(
      "[system]\nomega_hz = 46.6\nj_hz = 3.1\nd_hz = 640\n"
      "[schedule]\n"
      "t_start_k = 294\n"
      "t_end_k = 305\n"
      "ramp_s = 3.3\n"
      "t_c_k = 302\n"
      "d_ref_hz = 640\n"
      "t_ref_k = 294\n");
  const auto sched = cfg.schedule();
  REQUIRE(sched.has_value());
  CHECK(sched->d_of(0.0) == doctest::Approx(640.0));
  CHECK(sched->d_of(3.3) == 0.0);
  REQUIRE(sched->transition_time().has_value());
}
