#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "omf/mpp.hpp"
#include "omf/rng.hpp"

using namespace omf;

namespace {

constexpr double pi = std::numbers::pi;

double linf(const GridFn& a, const GridFn& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

ModelSpec pendulum_model() { return {Sigma::cosine(2.0, 1.5, 10.0), Force::pendulum(pendulum_k(), 0.0)}; }

ModelSpec duffing_model() {
  return {Sigma::constant(3.0), Force::potential_force("duffing", Potential::double_well(), 0.1)};
}

// Noiseless solution of the cellwise scheme slope(phi) = cell mean of f, by
// fixed-point iteration of the implicit trapezoid step.
PathPair discrete_noiseless(const ModelSpec& m, double x0, double y0, const TimeGrid& g) {
  const double dt = g.step();
  std::vector<double> x(g.size(), x0), y(g.size(), y0);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double f0 = m.force.f(g.node(i), x[i], y[i]);
    y[i + 1] = y[i] + dt * f0;
    x[i + 1] = x[i] + 0.5 * dt * (y[i] + y[i + 1]);
    for (int k = 0; k < 100; ++k) {
      y[i + 1] = y[i] + 0.5 * dt * (f0 + m.force.f(g.node(i + 1), x[i + 1], y[i + 1]));
      x[i + 1] = x[i] + 0.5 * dt * (y[i] + y[i + 1]);
    }
  }
  return PathPair(GridFn(g, x), GridFn(g, y), BoundaryData{x0, y0, x.back(), y.back()});
}

// Boundary-preserving bump 16 t^2 (1-t)^2 sum_k c_k sin(k pi t) added to psi.
PathPair perturb(const PathPair& p, double amplitude, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  double c[3];
  for (double& v : c) v = rng.normal();
  const double norm = std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]);
  const TimeGrid& g = p.grid();
  std::vector<double> psi(g.size()), phi(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = g.node(i);
    double s = 0.0, ds = 0.0;
    for (int k = 0; k < 3; ++k) {
      s += c[k] * std::sin((k + 1) * pi * t);
      ds += c[k] * (k + 1) * pi * std::cos((k + 1) * pi * t);
    }
    const double b = 16.0 * t * t * (1 - t) * (1 - t), db = 32.0 * t * (1 - t) * (1 - 2 * t);
    psi[i] = p.psi()[i] + amplitude / norm * b * s;
    phi[i] = p.phi()[i] + amplitude / norm * (db * s + b * ds);
  }
  return PathPair(GridFn(g, psi), GridFn(g, phi), p.boundary());
}

}  // namespace

TEST_CASE("free motion under zero drift") {
  const TimeGrid g(101);
  const PathPair p = noiseless_shoot({Sigma::constant(1.0), Force::zero()}, 0.5, -2.0, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(p.psi()[i] == doctest::Approx(0.5 - 2.0 * g.node(i)).epsilon(1e-14));
    CHECK(p.phi()[i] == -2.0);
  }
}

TEST_CASE("harmonic oscillator against its closed form") {
  const TimeGrid g(10001);
  const PathPair p = noiseless_shoot({Sigma::constant(1.0), Force::harmonic(pi * pi)}, 1.0, 0.0, g);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(p.psi()[i] - std::cos(pi * g.node(i))));
  CHECK(err <= 1e-8);
}

TEST_CASE("pendulum reaches the upper turning point") {
  const PathPair p = noiseless_shoot(pendulum_model(), -0.5 * pi, 0.0, TimeGrid(100001));
  CHECK(std::abs(p.psi().back() - 0.5 * pi) <= 1e-6);
  CHECK(std::abs(p.phi().back()) <= 1e-5);
}

TEST_CASE("non-finite trajectories are reported") {
  Force blow = Force::zero();
  blow.f = [](double, double, double y) { return y * y * 1e6; };
  CHECK_THROWS_AS(noiseless_shoot({Sigma::constant(1.0), blow}, 0.0, 1.0, TimeGrid(33)), NumericalFailure);
}

TEST_CASE("analytic gradient matches finite differences") {
  const TimeGrid g(65);
  const PathPair p = PathPair::from_velocity(GridFn::from(g, [](double t) { return std::sin(3.0 * t) + t; }), -1.0);
  for (double h : {0.3, 0.5, 0.7}) {
    for (const ModelSpec& m : {pendulum_model(), duffing_model()}) {
      const OMGradient a = om_objective(p, m, HurstSpec(h), GradientMode::analytic);
      const OMGradient f = om_objective(p, m, HurstSpec(h), GradientMode::finite_difference);
      CHECK(a.value == doctest::Approx(-om_functional(p, m, HurstSpec(h)).J).epsilon(1e-12));
      double scale = 0.0, err = 0.0;
      for (std::size_t k = 0; k < a.gradient.size(); ++k) {
        scale = std::max(scale, std::abs(f.gradient[k]));
        err = std::max(err, std::abs(a.gradient[k] - f.gradient[k]));
      }
      CHECK(err <= 1e-6 * (1.0 + scale));
    }
  }
}

TEST_CASE("most probable pendulum path is the noiseless trajectory") {
  const TimeGrid g(129);
  const BoundaryData b{-0.5 * pi, 0.0, 0.5 * pi, 0.0};
  for (double h : {0.3, 0.5, 0.7}) {
    MppProblem p;
    p.model = pendulum_model();
    p.H = HurstSpec(h);
    p.boundary = b;
    p.grid = g;
    const MppSolution s = minimize_om(p);
    CHECK(s.converged);
    CHECK(s.starts_tried == 5);
    CHECK(s.boundary_residual <= 1e-10);
    const PathPair ref = noiseless_shoot(p.model, b.x0, b.y0, g);
    CHECK(linf(s.path.psi(), ref.psi()) <= 2e-2);
    const double J_ref = om_functional(ref, p.model, p.H).J;
    for (std::uint64_t k = 0; k < 20; ++k) CHECK(J_ref > om_functional(perturb(ref, 0.05, k), p.model, p.H).J);
  }
}

TEST_CASE("zero drift gives an affine velocity") {
  MppProblem p;
  p.model = {Sigma::constant(1.0), Force::zero()};
  p.H = HurstSpec(0.5);
  p.grid = TimeGrid(65);
  p.boundary = {0.0, 0.0, 0.75, 1.5};
  const MppSolution s = minimize_om(p);
  CHECK(s.converged);
  const CellFn a = cell_slope(s.path.phi());
  for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(s.J.J == doctest::Approx(-0.5 * 1.5 * 1.5).epsilon(1e-8));
}

TEST_CASE("boundary data is honoured exactly") {
  MppProblem p;
  p.model = duffing_model();
  p.H = HurstSpec(0.3);
  p.grid = TimeGrid(65);
  p.boundary = {-1.0, 0.3, 1.2, -0.4};
  const MppSolution s = minimize_om(p);
  CHECK(s.path.psi().front() == -1.0);
  CHECK(s.path.phi().front() == 0.3);
  CHECK(std::abs(s.path.psi().back() - 1.2) <= 1e-10);
  CHECK(std::abs(s.path.phi().back() + 0.4) <= 1e-10);
}

TEST_CASE("multistart selection does not depend on the thread count") {
  MppProblem p;
  p.model = duffing_model();
  p.H = HurstSpec(0.7);
  p.grid = TimeGrid(65);
  p.boundary = {-1.0, 0.0, 1.0, 0.0};
  p.seed = 3;
  const MppSolution one = minimize_om(p);
  p.threads = 3;
  const MppSolution three = minimize_om(p);
  CHECK(one.best_start == three.best_start);
  CHECK(one.J.J == three.J.J);
  for (std::size_t i = 0; i < p.grid.size(); ++i) CHECK(one.path.psi()[i] == three.path.psi()[i]);
}

TEST_CASE("minimize_om rejects bad problems") {
  MppProblem p;
  p.model = duffing_model();
  p.grid = TimeGrid(17);
  p.boundary = {-1.0, 0.0, 1.0, 0.0};
  CHECK_THROWS_AS(minimize_om(p), std::invalid_argument);
  p.grid = TimeGrid(33);
  p.boundary.x1 = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(minimize_om(p), std::invalid_argument);
  p.boundary.x1 = 1.0;
  p.model.force.f = [](double, double, double) { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(minimize_om(p), std::invalid_argument);
}

TEST_CASE("Euler-Lagrange residual vanishes on discrete noiseless paths") {
  const TimeGrid g(257);
  const ModelSpec m = pendulum_model();
  const PathPair p = discrete_noiseless(m, -0.5 * pi, 0.0, g);
  for (double h : {0.3, 0.5, 0.7}) {
    for (ELVariant v : {ELVariant::adjoint, ELVariant::printed}) {
      CHECK(el_residual(p, m, HurstSpec(h), v).sup_norm() <= 1e-6 * static_cast<double>(g.size()));
    }
  }
}

TEST_CASE("Euler-Lagrange residual on RK4 paths converges at second order") {
  const ModelSpec m = pendulum_model();
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t n : {129, 257, 513}) {
    const PathPair p = noiseless_shoot(m, -0.5 * pi, 0.0, TimeGrid(n));
    const double r = el_residual(p, m, HurstSpec(0.5)).sup_norm();
    CHECK(r < previous / 3.0);
    previous = r;
  }
}

TEST_CASE("Euler-Lagrange residual vanishes for affine velocity under zero drift") {
  const TimeGrid g(65);
  const ModelSpec m{Sigma::constant(1.0), Force::zero()};
  const PathPair p = PathPair::from_velocity(GridFn::from(g, [](double t) { return 2.0 * t; }), 0.0);
  for (ELVariant v : {ELVariant::adjoint, ELVariant::printed}) {
    CHECK(el_residual(p, m, HurstSpec(0.5), v).sup_norm() <= 1e-8);
  }
}

TEST_CASE("minimizer satisfies the Euler-Lagrange equation as the grid is refined") {
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t n : {65, 129, 257}) {
    MppProblem p;
    p.model = duffing_model();
    p.H = HurstSpec(0.5);
    p.grid = TimeGrid(n);
    p.boundary = {-1.0, 0.0, 1.0, 0.0};
    const MppSolution s = minimize_om(p);
    const double r = el_residual(s.path, p.model, p.H).sup_norm();
    CHECK(r < previous);
    previous = r;
  }
}

TEST_CASE("EL boundary value problem at an equilibrium") {
  const TimeGrid g(129);
  const MppSolution s = solve_el_bvp(Potential::double_well(), 0.1, {1.0, 0.0, 1.0, 0.0}, g);
  CHECK(s.converged);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(s.path.psi()[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("symmetric undamped transition is odd about the midpoint") {
  const TimeGrid g(257);
  const MppSolution s = solve_el_bvp(Potential::double_well(), 0.0, {-1.0, 0.0, 1.0, 0.0}, g);
  CHECK(s.converged);
  CHECK(std::abs(s.path.psi()[128]) <= 1e-6);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(s.path.psi()[i] + s.path.psi()[256 - i]) <= 1e-6);
  CHECK(s.boundary_residual <= 1e-10);
}

TEST_CASE("EL solver and direct minimization agree on the Duffing transition") {
  const TimeGrid g(513);
  const BoundaryData b{-1.0, 0.0, 1.0, 0.0};
  MppProblem p;
  p.model = duffing_model();
  p.H = HurstSpec(0.5);
  p.grid = g;
  p.boundary = b;
  const MppSolution direct = minimize_om(p);
  const MppSolution el = solve_el_bvp(Potential::double_well(), 0.1, b, g, std::nullopt, 3.0);
  CHECK(direct.converged);
  CHECK(el.converged);
  CHECK(std::abs(direct.J.J - el.J.J) <= 1e-4 * std::abs(el.J.J));
  CHECK(linf(direct.path.psi(), el.path.psi()) <= 1e-2);
  REQUIRE(el.reduction);
  CHECK(el.J.mismatch_term == doctest::Approx(-el.reduction->full / 18.0).epsilon(1e-3));
}
