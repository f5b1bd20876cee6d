#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("omf_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args, const fs::path& out) {
  const std::string cmd =
      std::string(OMF_CLI_PATH) + " --out " + out.string() + " " + args + " > " + (out.string() + ".log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string pendulum =
    "--set model.force=pendulum --set sigma.kind=cos --set sigma.sigma0=2 --set sigma.amplitude=0.1 "
    "--set sigma.omega=10 --set noise.H=0.51 --set noise.beta=0.28";

}  // namespace

TEST_CASE("check reports a satisfied regularity condition") {
  const fs::path out = scratch("check_ok");
  CHECK(run("check " + pendulum, out) == 0);
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(j["pass"] == true);
  CHECK(j["beta_in_window"] == false);
  CHECK(fs::exists(out / "manifest.ini"));
}

TEST_CASE("check fails for vanishing noise") {
  const fs::path out = scratch("check_fail");
  CHECK(run("check " + pendulum + " --set sigma.sigma0=0 --set sigma.amplitude=0", out) == 1);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("check --set noise.H=1.2", scratch("bad_h")) == 2);
  CHECK(run("check --set no.such_key=1", scratch("bad_key")) == 2);
  CHECK(run("mpp --set model.force=zero", scratch("no_boundary")) == 2);
  CHECK(run("simulate --set model.force=zero --set boundary.x0=0 --set boundary.y0=0 --set mc.n_paths=0",
            scratch("no_paths")) == 2);
}

TEST_CASE("mpp writes a path and a summary") {
  const fs::path out = scratch("mpp");
  CHECK(run("mpp --set model.force=zero --set sigma.kind=constant --set sigma.sigma0=1 --set noise.H=0.5 "
            "--set grid.n=65 --set boundary.x0=0 --set boundary.y0=0 --set boundary.x1=0.5 --set boundary.y1=1",
            out) == 0);
  CHECK(fs::exists(out / "path.csv"));
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(j["converged"] == true);
  CHECK(j["J"].get<double>() == doctest::Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("simulation output is thread invariant and reproducible from its manifest") {
  const std::string args = "simulate " + pendulum +
                           " --set boundary.x0=-1.5707963267948966 --set boundary.y0=0 --set mc.n_paths=600 "
                           "--set mc.n_steps=64 --seed 4";
  const fs::path a = scratch("sim_a"), b = scratch("sim_b"), c = scratch("sim_c");
  REQUIRE(run(args + " --threads 1", a) == 0);
  REQUIRE(run(args + " --threads 3", b) == 0);
  CHECK(slurp(a / "mean.csv") == slurp(b / "mean.csv"));
  REQUIRE(run("--config " + (a / "manifest.ini").string() + " simulate", c) == 0);
  CHECK(slurp(a / "mean.csv") == slurp(c / "mean.csv"));
  CHECK(slurp(a / "mean.csv").rfind("t,mean_x,mean_y", 0) == 0);
}

TEST_CASE("duffing example runs end to end") {
  const fs::path out = scratch("duffing");
  CHECK(run("example duffing --set grid.n=129", out) == 0);
  CHECK(fs::exists(out / "path.csv"));
  CHECK(fs::exists(out / "path_el.csv"));
}
