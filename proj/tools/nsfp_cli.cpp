// Command-line front end: run, sweep, audit-eos, validate-geometry,
// print-defaults.  Exit codes: 0 success/PASS, 1 usage, 2 config,
// 3 numerical failure, 4 invariant violation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nsfp/config.hpp"
#include "nsfp/diagnostics.hpp"
#include "nsfp/harness.hpp"
#include "nsfp/io.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  nsfp::RunConfig cfg = nsfp::parse_config(config_path);
  nsfp::RunOptions opt;
  opt.write_outputs = true;
  nsfp::RunResult res = nsfp::run_simulation(cfg, opt);
  const nsfp::DiagnosticsRecord& last = res.records.back();
  std::printf("steps:          %ld\n", res.steps);
  std::printf("final time:     %.6g\n", last.t);
  std::printf("final mass:     %.12g\n", last.mass);
  std::printf("mass drift:     %.3e (relative)\n",
              std::abs(last.mass - res.records.front().mass) /
                  std::max(res.records.front().mass, 1e-300));
  std::printf("solid mass:     %.3e\n", last.solid_mass);
  std::printf("min cell sigma: %.3e\n", last.sigma_min);
  std::printf("inversion warnings: %ld\n", res.inversion_warnings);
  for (const auto& w : res.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("wall time:      %.1f s\n", res.wall_seconds);
  std::printf("outputs in:     %s\n", cfg.output.directory.c_str());
  return nsfp::exit_ok;
}

int cmd_sweep(const std::string& config_path, const std::string& param) {
  nsfp::RunConfig cfg = nsfp::parse_config(config_path);
  nsfp::SweepParam p;
  if (param == "eps")
    p = nsfp::SweepParam::Eps;
  else if (param == "h")
    p = nsfp::SweepParam::H;
  else if (param == "delta")
    p = nsfp::SweepParam::Delta;
  else {
    std::fprintf(stderr, "unknown sweep parameter '%s' (want eps|h|delta)\n",
                 param.c_str());
    return nsfp::exit_usage;
  }
  nsfp::SweepReport rep = nsfp::run_sweep(cfg, p);
  std::fputs(rep.format().c_str(), stdout);
  if (!cfg.output.directory.empty()) {
    std::filesystem::create_directories(cfg.output.directory);
    nsfp::atomic_write(cfg.output.directory + "/sweep_" + param + ".csv", rep.csv());
    std::printf("metric table: %s/sweep_%s.csv\n", cfg.output.directory.c_str(),
                param.c_str());
  }
  return rep.pass ? nsfp::exit_ok : nsfp::exit_numerical;
}

int cmd_audit_eos(const std::string& config_path) {
  nsfp::RunConfig cfg = nsfp::parse_config(config_path);
  nsfp::Eos eos(cfg.eos);
  nsfp::AuditReport rep = nsfp::hypothesis_audit(eos, cfg.transport);
  std::fputs(rep.format().c_str(), stdout);

  auto helm = nsfp::helmholtz_coercivity(eos, {0.5, 1.0, 2.0});
  for (const auto& h : helm)
    std::printf("%s  helmholtz_coercivity(theta_tilde=%g)  min=%.3e at (%.3g, %.3g)\n",
                h.pass ? "PASS" : "FAIL", h.theta_tilde, h.min_value, h.arg_rho,
                h.arg_theta);
  bool pass = rep.all_pass();
  for (const auto& h : helm) pass = pass && h.pass;
  return pass ? nsfp::exit_ok : nsfp::exit_numerical;
}

int cmd_validate_geometry(const std::string& config_path) {
  nsfp::RunConfig cfg = nsfp::parse_config(config_path);
  nsfp::Grid g = cfg.make_grid();
  std::vector<double> times;
  for (int i = 0; i <= 8; ++i) times.push_back(cfg.t_end * i / 8.0);
  nsfp::VelocityValidationReport rep =
      nsfp::validate_velocity(g, cfg.velocity, cfg.shape, times, cfg.tube_width_cells,
                              cfg.volume_floor, cfg.stepping.dt_geom);
  std::fputs(rep.format().c_str(), stdout);
  if (!rep.volume_floor_ok) return nsfp::exit_invariant;
  return rep.support_ok ? nsfp::exit_ok : nsfp::exit_numerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalized Navier-Stokes-Fourier-Poisson verification solver"};
  app.require_subcommand(1);

  std::string config_path, sweep_param;

  auto* run = app.add_subcommand("run", "run a single simulation");
  run->add_option("config", config_path, "configuration file")->required();

  auto* sweep = app.add_subcommand("sweep", "parameter-continuation sweep");
  sweep->add_option("config", config_path, "configuration file")->required();
  sweep->add_option("--param", sweep_param, "swept parameter: eps | h | delta")
      ->required();

  auto* audit = app.add_subcommand("audit-eos", "run the constitutive hypothesis audit");
  audit->add_option("config", config_path, "configuration file")->required();

  auto* geom = app.add_subcommand("validate-geometry",
                                  "check the prescribed velocity field and domain motion");
  geom->add_option("config", config_path, "configuration file")->required();

  auto* defaults =
      app.add_subcommand("print-defaults", "emit the commented reference configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? nsfp::exit_ok : nsfp::exit_usage;
  }

  try {
    if (defaults->parsed()) {
      std::fputs(nsfp::default_config_text().c_str(), stdout);
      return nsfp::exit_ok;
    }
    if (run->parsed()) return cmd_run(config_path);
    if (sweep->parsed()) return cmd_sweep(config_path, sweep_param);
    if (audit->parsed()) return cmd_audit_eos(config_path);
    if (geom->parsed()) return cmd_validate_geometry(config_path);
  } catch (const nsfp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return nsfp::exit_config;
  } catch (const nsfp::InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return nsfp::exit_invariant;
  } catch (const nsfp::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return nsfp::exit_numerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return nsfp::exit_numerical;
  }
  return nsfp::exit_usage;
}
