// End-to-end checks of the command-line tool: subcommands, exit codes and
// output files.  The binary path arrives via the NSFP_CLI environment variable
// set by CMake.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsfp/config.hpp"

namespace {

std::string cli_path() {
  const char* p = std::getenv("NSFP_CLI");
  REQUIRE_MESSAGE(p != nullptr, "NSFP_CLI must point at the nsfp binary");
  return p;
}

int run_cmd(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = cli_path() + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / "nsfp_cli_test";
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("print-defaults emits a parseable reference configuration") {
  TempDir tmp;
  const std::string out = (tmp.path / "defaults.ini").string();
  CHECK(run_cmd("print-defaults", out) == 0);
  nsfp::RunConfig cfg = nsfp::parse_config(out);
  CHECK(cfg.cells == 64);
  CHECK(cfg.penalty.beta == 4.0);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cmd("definitely-not-a-subcommand") == 1);
  CHECK(run_cmd("") == 1);
  TempDir tmp;
  const std::string cfgfile = (tmp.path / "c.ini").string();
  {
    std::ofstream(cfgfile) << nsfp::default_config_text();
  }
  CHECK(run_cmd("sweep " + cfgfile + " --param bogus") == 1);
}

TEST_CASE("config errors exit with code 2") {
  CHECK(run_cmd("run /nonexistent/path.ini") == 2);

  TempDir tmp;
  const std::string bad = (tmp.path / "bad.ini").string();
  std::string text = nsfp::default_config_text();
  const auto pos = text.find("beta = 4");
  text.replace(pos, 8, "beta = 3");
  {
    std::ofstream(bad) << text;
  }
  const std::string log = (tmp.path / "log.txt").string();
  CHECK(run_cmd("run " + bad, log) == 2);
  CHECK(slurp(log).find("beta >= 4") != std::string::npos);
}

TEST_CASE("a volume floor above |Omega_0| exits with code 4 at t = 0") {
  TempDir tmp;
  const std::string bad = (tmp.path / "floor.ini").string();
  std::string text = nsfp::default_config_text();
  const auto pos = text.find("volume_floor = 0.5");
  text.replace(pos, 18, "volume_floor = 100");
  {
    std::ofstream(bad) << text;
  }
  CHECK(run_cmd("run " + bad) == 4);
}

TEST_CASE("audit-eos passes on the defaults and prints the report") {
  TempDir tmp;
  const std::string cfgfile = (tmp.path / "c.ini").string();
  {
    std::ofstream(cfgfile) << nsfp::default_config_text();
  }
  const std::string log = (tmp.path / "audit.txt").string();
  CHECK(run_cmd("audit-eos " + cfgfile, log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("gibbs_consistency") != std::string::npos);
  CHECK(out.find("ALL CHECKS PASS") != std::string::npos);
  CHECK(out.find("helmholtz_coercivity") != std::string::npos);
}

TEST_CASE("validate-geometry reports on the reference motion") {
  TempDir tmp;
  const std::string cfgfile = (tmp.path / "c.ini").string();
  std::string text = nsfp::default_config_text();
  // shorten: geometry validation samples t in [0, t_end]
  const auto pos = text.find("t_end = 0.5");
  text.replace(pos, 11, "t_end = 0.1");
  {
    std::ofstream(cfgfile) << text;
  }
  const std::string log = (tmp.path / "geom.txt").string();
  CHECK(run_cmd("validate-geometry " + cfgfile, log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("max |div V| in tube") != std::string::npos);
  CHECK(out.find("VIOLATED") == std::string::npos);
}

TEST_CASE("run writes diagnostics CSV and self-describing snapshots") {
  TempDir tmp;
  const std::string cfgfile = (tmp.path / "c.ini").string();
  std::string text = nsfp::default_config_text();
  auto replace = [&](const std::string& from, const std::string& to) {
    const auto p = text.find(from);
    REQUIRE(p != std::string::npos);
    text.replace(p, from.size(), to);
  };
  replace("t_end = 0.5", "t_end = 0.004");
  replace("cells = 64", "cells = 24");
  replace("directory = out", "directory = " + (tmp.path / "out").string());
  {
    std::ofstream(cfgfile) << text;
  }
  const std::string log = (tmp.path / "run.txt").string();
  CHECK(run_cmd("run " + cfgfile, log) == 0);
  CHECK(slurp(log).find("mass drift") != std::string::npos);

  const std::string csv = slurp((tmp.path / "out" / "diagnostics.csv").string());
  CHECK(csv.rfind("t,dt,mass,", 0) == 0); // header row first
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 3);

  const std::string snap = slurp((tmp.path / "out" / "snapshot_0.dat").string());
  CHECK(snap.find("# nsfp-snapshot") == 0);
  CHECK(snap.find("# fields rho") != std::string::npos);
}
