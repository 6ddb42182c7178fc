#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "lls/run_config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"two-spin singlet-state simulator"};
  app.require_subcommand(1);

  lls::CliOptions opts;
  std::string parse_file;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config_path, "run description file");
    if (needs_config) c->required();
    sub->add_option("--seed", [&](const CLI::results_t& res) {
      opts.seed = std::stoull(res[0]);
      return true;
    }, "master RNG seed (overrides the config)");
    sub->add_option("--out", [&](const CLI::results_t& res) {
      opts.out_dir = res[0];
      return true;
    }, "output directory");
    sub->add_option("--threads", opts.threads, "worker threads for sweeps");
    sub->add_option("--format", opts.format, "output format (csv)");
  };

  auto* params = app.add_subcommand("params", "report resonance parameters");
  add_common(params, true);
  auto* run = app.add_subcommand("run", "execute the configured experiment");
  add_common(run, true);
  auto* parse = app.add_subcommand("parse", "parse and canonicalize a pulse program");
  parse->add_option("file", parse_file, "pulse program file")->required();
  auto* calibrate = app.add_subcommand("calibrate", "calibrate relaxation rates");
  add_common(calibrate, true);

  CLI11_PARSE(app, argc, argv);

  std::string text;
  int rc = lls::kExitOk;
  if (params->parsed())
    rc = lls::cmd_params(opts, text);
  else if (run->parsed())
    rc = lls::cmd_run(opts, text);
  else if (parse->parsed())
    rc = lls::cmd_parse(parse_file, text);
  else if (calibrate->parsed())
    rc = lls::cmd_calibrate(opts, text);

  std::fputs(text.c_str(), rc == lls::kExitOk ? stdout : stderr);
  return rc;
}
