#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "omf/io.hpp"
#include "omf/montecarlo.hpp"
#include "omf/mpp.hpp"
#include "omf/omfunctional.hpp"

namespace fs = std::filesystem;
using namespace omf;

namespace {

constexpr const char* version = "1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::set<std::string> known_keys = {
    "model.force", "model.k", "model.gamma", "model.coefficients", "model.forcing_amplitude",
    "model.forcing_omega", "sigma.kind", "sigma.sigma0", "sigma.amplitude", "sigma.omega", "noise.H",
    "noise.beta", "grid.n", "boundary.x0", "boundary.y0", "boundary.x1", "boundary.y1", "mpp.starts",
    "mpp.max_iter", "mpp.seed", "mpp.tolerance", "mc.n_paths", "mc.n_steps", "mc.seed", "mc.threads",
    "mc.method", "mc.store_paths", "tube.center", "tube.mode", "tube.epsilon", "ratio.center1",
    "ratio.center2", "ratio.epsilon", "smallball.eps_list", "output.dir"};

// Resolved configuration: defaults, then the config file, then --set overrides.
class Config {
 public:
  void set(const std::string& key, const std::string& value) {
    if (!known_keys.contains(key)) throw UsageError("unknown config key '" + key + "'");
    values_[key] = value;
  }
  void set_default(const std::string& key, const std::string& value) {
    if (!values_.contains(key)) set(key, value);
  }

  void load(const fs::path& file) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(file.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw UsageError(std::string("cannot parse config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
      if (section == "run") continue;
      if (body.empty()) throw UsageError("config entry '" + section + "' is outside a section");
      for (const auto& [key, value] : body) set(section + "." + key, value.data());
    }
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("missing config key '" + key + "'");
    return it->second;
  }

  double num(const std::string& key) const {
    const std::string s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || std::isnan(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("config key '" + key + "' is not a number: '" + s + "'");
    }
  }

  double finite(const std::string& key) const {
    const double v = num(key);
    if (!std::isfinite(v)) throw UsageError("config key '" + key + "' must be finite");
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t min = 0) const {
    const std::string s = str(key);
    std::uint64_t v = 0;
    try {
      std::size_t used = 0;
      if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
      v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw UsageError("config key '" + key + "' is not a non-negative integer: '" + s + "'");
    }
    if (v < min) throw UsageError("config key '" + key + "' must be at least " + std::to_string(min));
    return v;
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' has a malformed entry '" + item + "'");
      }
    }
    return out;
  }

  void write_manifest(const fs::path& file, const std::string& command) const {
    fs::create_directories(file.parent_path());
    std::ofstream out(file);
    out << "[run]\ncommand = " << command << "\nversion = " << version << "\n";
    std::string section;
    for (const auto& [key, value] : values_) {
      const auto dot = key.find('.');
      if (key.substr(0, dot) != section) {
        section = key.substr(0, dot);
        out << "\n[" << section << "]\n";
      }
      out << key.substr(dot + 1) << " = " << value << "\n";
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

struct Context {
  Config cfg;
  std::string command;
  fs::path out;
};

HurstSpec hurst(const Config& c) {
  const double H = c.finite("noise.H");
  if (!(H > 0.25 && H < 1.0)) throw UsageError("noise.H must lie in (1/4, 1)");
  return HurstSpec(H);
}

double beta(const Config& c, const HurstSpec& H) {
  if (!c.has("noise.beta")) return default_beta(H);
  const double b = c.finite("noise.beta");
  if (!(b > 0.0 && b < 1.0)) throw UsageError("noise.beta must lie in (0, 1)");
  return b;
}

ModelSpec model(const Config& c) {
  ModelSpec m;
  const std::string kind = c.str("sigma.kind");
  const double s0 = c.finite("sigma.sigma0");
  if (kind == "constant") {
    m.sigma = Sigma::constant(s0);
  } else if (kind == "cos" || kind == "sin") {
    const double A = c.finite("sigma.amplitude"), w = c.finite("sigma.omega");
    m.sigma = kind == "cos" ? Sigma::cosine(s0, A, w) : Sigma::sine(s0, A, w);
  } else {
    throw UsageError("sigma.kind must be constant, cos or sin");
  }

  const std::string force = c.str("model.force");
  const double gamma = c.finite("model.gamma");
  if (force == "pendulum") {
    m.force = Force::pendulum(c.finite("model.k"), gamma);
  } else if (force == "duffing" || force == "polynomial") {
    const Potential V = force == "duffing" ? Potential::double_well() : Potential::polynomial(c.list("model.coefficients"));
    m.force = Force::potential_force(force, V, gamma, c.finite("model.forcing_amplitude"),
                                     c.finite("model.forcing_omega"));
  } else if (force == "zero") {
    m.force = Force::zero();
  } else {
    throw UsageError("model.force must be pendulum, duffing, polynomial or zero");
  }
  return m;
}

BoundaryData boundary(const Config& c) {
  return {c.finite("boundary.x0"), c.finite("boundary.y0"), c.finite("boundary.x1"), c.finite("boundary.y1")};
}

EnsembleSpec ensemble(const Config& c) {
  EnsembleSpec s;
  s.model = model(c);
  s.H = hurst(c);
  s.x0 = c.finite("boundary.x0");
  s.y0 = c.finite("boundary.y0");
  s.n_steps = c.count("mc.n_steps", 64);
  s.n_paths = c.count("mc.n_paths", 1);
  s.seed = c.count("mc.seed");
  s.threads = c.count("mc.threads", 1);
  s.store_paths = c.count("mc.store_paths");
  const std::string method = c.str("mc.method");
  if (method == "cholesky") {
    s.method = SampleMethod::cholesky;
  } else if (method == "kernel") {
    s.method = SampleMethod::kernel_synthesis;
  } else {
    throw UsageError("mc.method must be cholesky or kernel");
  }
  return s;
}

double epsilon(const Config& c, const std::string& key) {
  const double e = c.num(key);
  if (!(e >= 0.0)) throw UsageError(key + " must be non-negative");
  return e;
}

PathPair center_path(const std::string& spec, const EnsembleSpec& s) {
  const TimeGrid grid = s.grid();
  if (spec == "noiseless") return noiseless_shoot(s.model, s.x0, s.y0, grid);
  if (spec.rfind("ramp:", 0) == 0) {
    double c = 0.0;
    try {
      c = std::stod(spec.substr(5));
    } catch (const std::exception&) {
      throw UsageError("malformed ramp centre '" + spec + "'");
    }
    const GridFn phi = GridFn::from(grid, [&](double t) { return s.y0 + c * t; });
    return PathPair::from_velocity(phi, s.x0);
  }
  if (spec.rfind("csv:", 0) == 0) {
    PathPair p = read_path_csv(spec.substr(4));
    if (!(p.grid() == grid)) throw UsageError("centre CSV does not match mc.n_steps");
    return p;
  }
  throw UsageError("centre must be noiseless, ramp:<c> or csv:<file>");
}

void add_common(FlatRecord& r, const Context& ctx) {
  r.set("command", ctx.command);
  r.set("version", version);
}

void add_ensemble(FlatRecord& r, const EnsembleSpec& s) {
  r.set("H", s.H.H());
  r.set("n_steps", s.n_steps);
  r.set("n_paths", s.n_paths);
  r.set("mc_seed", s.seed);
  r.set("method", to_string(s.n_steps + 1 > FbmSampler::max_cholesky_nodes ? SampleMethod::kernel_synthesis : s.method));
}

void finish(const Context& ctx, const FlatRecord& r) {
  r.write(ctx.out / "summary.json");
  ctx.cfg.write_manifest(ctx.out / "manifest.ini", ctx.command);
  std::cout << r.to_json();
}

int cmd_check(Context& ctx) {
  const Config& c = ctx.cfg;
  const HurstSpec H = hurst(c);
  const ModelSpec m = model(c);
  const double b = beta(c, H);
  const AssumptionReport rep = check_assumption_A(m, H, b);
  FlatRecord r;
  add_common(r, ctx);
  r.set("pass", rep.pass).set("H", H.H()).set("beta", b).set("beta_in_window", rep.beta_in_window);
  r.set("m", rep.m).set("M", rep.M).set("L", rep.L).set("force_bounded", rep.force_bounded);
  r.set("inequality_applicable", rep.inequality_applicable);
  if (rep.inequality_applicable) r.set("ratio", rep.ratio);
  std::string reasons;
  for (const auto& s : rep.reasons) reasons += (reasons.empty() ? "" : "; ") + s;
  r.set("reasons", reasons);
  finish(ctx, r);
  return rep.pass ? 0 : 1;
}

double linf(const GridFn& a, const GridFn& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

int run_mpp(Context& ctx, FlatRecord& r) {
  const Config& c = ctx.cfg;
  MppProblem p;
  p.model = model(c);
  p.H = hurst(c);
  p.boundary = boundary(c);
  p.grid = TimeGrid(c.count("grid.n", 33));
  p.starts = c.count("mpp.starts", 1);
  p.max_iter = c.count("mpp.max_iter", 1);
  p.seed = c.count("mpp.seed");
  p.tolerance = c.finite("mpp.tolerance");
  p.threads = c.count("mc.threads", 1);

  const MppSolution s = minimize_om(p);
  write_path_csv(ctx.out / "path.csv", s.path);
  r.set_om("", s.J);
  r.set("iterations", s.iterations).set("grad_norm", s.grad_norm).set("converged", s.converged);
  r.set("starts_tried", s.starts_tried).set("best_start", s.best_start).set("mpp_seed", s.seed);
  r.set("boundary_residual", s.boundary_residual);
  try {
    const PathPair ref = noiseless_shoot(p.model, p.boundary.x0, p.boundary.y0, p.grid);
    r.set("noiseless_distance", linf(s.path.psi(), ref.psi()));
    r.set("noiseless_endpoint_gap", std::max(std::abs(ref.psi().back() - p.boundary.x1),
                                             std::abs(ref.phi().back() - p.boundary.y1)));
  } catch (const NumericalFailure&) {
    r.set("noiseless_distance", std::nan(""));
  }
  bool ok = s.converged;

  const bool constant_sigma = p.model.sigma.lower == p.model.sigma.upper;
  if (p.H.regime() == Regime::standard && p.model.force.potential && constant_sigma) {
    const MppSolution e = solve_el_bvp(*p.model.force.potential, p.model.force.damping, p.boundary, p.grid,
                                       std::nullopt, p.model.sigma.upper);
    write_path_csv(ctx.out / "path_el.csv", e.path);
    r.set("el_J", e.J.J).set("el_converged", e.converged).set("el_iterations", e.iterations);
    r.set("el_reduced", e.reduction->reduced).set("el_boundary_correction", e.reduction->boundary_correction);
    r.set("el_J_gap", std::abs(e.J.J - s.J.J)).set("el_path_distance", linf(e.path.psi(), s.path.psi()));
    ok = ok && e.converged;
  }
  return ok ? 0 : 1;
}

int cmd_mpp(Context& ctx) {
  FlatRecord r;
  add_common(r, ctx);
  const int code = run_mpp(ctx, r);
  finish(ctx, r);
  return code;
}

int run_simulate(Context& ctx, FlatRecord& r) {
  const EnsembleSpec s = ensemble(ctx.cfg);
  const EnsembleResult e = simulate_ensemble(s);
  write_mean_csv(ctx.out / "mean.csv", e);
  for (const StoredPath& p : e.paths) {
    const PathPair pp(p.x, p.y, BoundaryData{s.x0, s.y0, p.x.back(), p.y.back()});
    write_path_csv(ctx.out / ("sample_" + std::to_string(p.index) + ".csv"), pp);
  }
  add_ensemble(r, s);
  r.set("valid", e.valid).set("diverged", e.diverged);
  try {
    const PathPair ref = noiseless_shoot(s.model, s.x0, s.y0, s.grid());
    r.set("noiseless_distance", linf(e.mean_x, ref.psi()));
  } catch (const NumericalFailure&) {
    r.set("noiseless_distance", std::nan(""));
  }
  return e.valid > 0 ? 0 : 1;
}

int cmd_simulate(Context& ctx) {
  FlatRecord r;
  add_common(r, ctx);
  const int code = run_simulate(ctx, r);
  finish(ctx, r);
  return code;
}

int cmd_tube(Context& ctx) {
  const Config& c = ctx.cfg;
  const EnsembleSpec s = ensemble(c);
  const double b = beta(c, s.H);
  const std::string mode = c.str("tube.mode");
  if (mode != "position" && mode != "noise") throw UsageError("tube.mode must be position or noise");
  const double eps = epsilon(c, "tube.epsilon");
  const PathPair center = center_path(c.str("tube.center"), s);
  const TubeResult t =
      tube_probability(s, center, eps, b, mode == "position" ? TubeMode::position_norm : TubeMode::noise_norm);
  FlatRecord r;
  add_common(r, ctx);
  add_ensemble(r, s);
  r.set("beta", b).set("epsilon", eps).set("mode", mode).set("center", c.str("tube.center"));
  r.set("p_hat", t.p_hat).set("hits", t.hits).set("trials", t.trials).set("diverged", t.diverged);
  r.set("ci_low", t.ci_low).set("ci_high", t.ci_high);
  finish(ctx, r);
  return 0;
}

int cmd_ratio(Context& ctx) {
  const Config& c = ctx.cfg;
  const EnsembleSpec s = ensemble(c);
  const double b = beta(c, s.H);
  const double eps = epsilon(c, "ratio.epsilon");
  if (!(eps > 0.0)) throw UsageError("ratio.epsilon must be positive");
  const PathPair p1 = center_path(c.str("ratio.center1"), s);
  const PathPair p2 = center_path(c.str("ratio.center2"), s);
  const RatioResult q = om_ratio_experiment(s, p1, p2, eps, b);
  FlatRecord r;
  add_common(r, ctx);
  add_ensemble(r, s);
  r.set("beta", b).set("epsilon", eps).set("center1", c.str("ratio.center1")).set("center2", c.str("ratio.center2"));
  r.set("log_ratio_mc", q.log_ratio_mc).set("log_ratio_se", q.log_ratio_se).set("delta_J", q.delta_J);
  r.set("relative_gap", q.relative_gap).set("inconclusive", q.inconclusive);
  r.set("hits1", q.tube1.hits).set("hits2", q.tube2.hits).set("trials", q.tube1.trials);
  r.set("diverged", q.tube1.diverged);
  finish(ctx, r);
  return q.inconclusive ? 1 : 0;
}

int cmd_smallball(Context& ctx) {
  const Config& c = ctx.cfg;
  const EnsembleSpec s = ensemble(c);
  const double b = beta(c, s.H);
  const SmallBallResult q = small_ball_diagnostic(s, b, c.list("smallball.eps_list"));
  FlatRecord r;
  add_common(r, ctx);
  add_ensemble(r, s);
  r.set("beta", b).set("slope", q.slope).set("intercept", q.intercept).set("trials", q.trials);
  for (std::size_t k = 0; k < q.points.size(); ++k) {
    const auto& p = q.points[k];
    const std::string pre = "point" + std::to_string(k) + "_";
    r.set(pre + "epsilon", p.epsilon).set(pre + "x", p.x).set(pre + "p_hat", p.p_hat);
    r.set(pre + "hits", p.hits).set(pre + "used", p.used);
  }
  finish(ctx, r);
  return 0;
}

int cmd_example(Context& ctx) {
  FlatRecord r;
  add_common(r, ctx);
  int code = run_mpp(ctx, r);
  code = std::max(code, run_simulate(ctx, r));
  finish(ctx, r);
  return code;
}

void defaults(Config& c, const std::string& example) {
  if (example == "pendulum") {
    c.set_default("model.force", "pendulum");
    c.set_default("sigma.kind", "cos");
    c.set_default("sigma.sigma0", "2");
    c.set_default("sigma.amplitude", "1.5");
    c.set_default("sigma.omega", "10");
    c.set_default("noise.H", "0.3");
    c.set_default("boundary.x0", format_double(-std::numbers::pi / 2));
    c.set_default("boundary.y0", "0");
    c.set_default("boundary.x1", format_double(std::numbers::pi / 2));
    c.set_default("boundary.y1", "0");
    c.set_default("mc.n_paths", "10000");
  } else if (example == "duffing") {
    c.set_default("model.force", "duffing");
    c.set_default("model.gamma", "0.1");
    c.set_default("sigma.kind", "constant");
    c.set_default("sigma.sigma0", "3");
    c.set_default("noise.H", "0.5");
    c.set_default("grid.n", "513");
    c.set_default("boundary.x0", "-1");
    c.set_default("boundary.y0", "0");
    c.set_default("boundary.x1", "1");
    c.set_default("boundary.y1", "0");
    c.set_default("mc.n_paths", "10000");
  }
  c.set_default("model.force", "zero");
  c.set_default("model.k", format_double(pendulum_k()));
  c.set_default("model.gamma", "0");
  c.set_default("model.coefficients", "0");
  c.set_default("model.forcing_amplitude", "0");
  c.set_default("model.forcing_omega", "0");
  c.set_default("sigma.kind", "constant");
  c.set_default("sigma.sigma0", "1");
  c.set_default("sigma.amplitude", "0");
  c.set_default("sigma.omega", "0");
  c.set_default("noise.H", "0.5");
  c.set_default("grid.n", "129");
  c.set_default("mpp.starts", "5");
  c.set_default("mpp.max_iter", "500");
  c.set_default("mpp.seed", "0");
  c.set_default("mpp.tolerance", "1e-8");
  c.set_default("mc.n_paths", "1000");
  c.set_default("mc.n_steps", "256");
  c.set_default("mc.seed", "0");
  c.set_default("mc.threads", "1");
  c.set_default("mc.method", "cholesky");
  c.set_default("mc.store_paths", "0");
  c.set_default("tube.center", "noiseless");
  c.set_default("tube.mode", "position");
  c.set_default("tube.epsilon", "1");
  c.set_default("ratio.center1", "ramp:1");
  c.set_default("ratio.center2", "ramp:0");
  c.set_default("ratio.epsilon", "1");
  c.set_default("smallball.eps_list", "1.0,0.7,0.5");
  c.set_default("output.dir", "omf_out");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Onsager-Machlup functional toolkit for second-order systems driven by fractional noise"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file, out_dir;
  std::vector<std::string> overrides;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_file, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config key, section.key=value");
  app.add_option("--out", out_dir, "Output directory");
  auto* threads_opt = app.add_option("--threads", threads, "Thread cap for Monte Carlo and multistart")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for Monte Carlo and multistart");

  std::string example;
  std::map<std::string, int (*)(Context&)> handlers = {{"check", cmd_check},       {"mpp", cmd_mpp},
                                                       {"simulate", cmd_simulate}, {"tube", cmd_tube},
                                                       {"ratio", cmd_ratio},       {"smallball", cmd_smallball},
                                                       {"example", cmd_example}};
  app.add_subcommand("check", "Check the standing assumptions for a model");
  app.add_subcommand("mpp", "Compute the most probable path");
  app.add_subcommand("simulate", "Simulate an ensemble and write its mean path");
  app.add_subcommand("tube", "Estimate a tube probability");
  app.add_subcommand("ratio", "Compare a tube-probability ratio with exp of the functional difference");
  app.add_subcommand("smallball", "Small-ball decay diagnostic for the noise integral");
  app.add_subcommand("example", "Run a preset example")
      ->add_option("name", example, "pendulum or duffing")
      ->required()
      ->check(CLI::IsMember({"pendulum", "duffing"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Context ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  try {
    if (!config_file.empty()) ctx.cfg.load(config_file);
    for (const std::string& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + o + "'");
      ctx.cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (*threads_opt) ctx.cfg.set("mc.threads", std::to_string(threads));
    if (*seed_opt) {
      ctx.cfg.set("mc.seed", std::to_string(seed));
      ctx.cfg.set("mpp.seed", std::to_string(seed));
    }
    if (!out_dir.empty()) ctx.cfg.set("output.dir", out_dir);
    defaults(ctx.cfg, ctx.command == "example" ? example : std::string());
    if (ctx.command == "mpp") {
      for (const char* k : {"boundary.x0", "boundary.y0", "boundary.x1", "boundary.y1"}) {
        if (!ctx.cfg.has(k)) throw UsageError(std::string("missing config key '") + k + "'");
      }
    }
    if (ctx.command == "simulate" || ctx.command == "tube" || ctx.command == "ratio" || ctx.command == "smallball") {
      ctx.cfg.set_default("boundary.x0", "0");
      ctx.cfg.set_default("boundary.y0", "0");
    }
    ctx.out = ctx.cfg.str("output.dir");
    if (ctx.command == "example") ctx.command = "example " + example;
    // Validate every numeric key that the command reads before running it.
    (void)model(ctx.cfg);
    (void)hurst(ctx.cfg);
    return handlers.at(app.get_subcommands().front()->get_name())(ctx);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
