#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "omf/montecarlo.hpp"
#include "omf/mpp.hpp"

using namespace omf;

namespace {

constexpr double pi = std::numbers::pi;

EnsembleSpec free_spec(double sigma, double H) {
  EnsembleSpec s;
  s.model = {Sigma::constant(sigma), Force::zero()};
  s.H = HurstSpec(H);
  s.n_steps = 64;
  s.n_paths = 2000;
  s.seed = 11;
  return s;
}

double linf(const GridFn& a, const GridFn& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

}  // namespace

TEST_CASE("deterministic ensemble follows free motion exactly") {
  EnsembleSpec s = free_spec(0.0, 0.5);
  s.x0 = 1.0;
  s.y0 = -0.5;
  s.n_paths = 10;
  const EnsembleResult r = simulate_ensemble(s);
  CHECK(r.valid == 10);
  for (std::size_t i = 0; i < s.grid().size(); ++i) {
    CHECK(r.mean_y[i] == -0.5);
    CHECK(r.mean_x[i] == doctest::Approx(1.0 - 0.5 * s.grid().node(i)).epsilon(1e-14));
  }
}

TEST_CASE("velocity is the noise integral under zero drift") {
  for (double h : {0.3, 0.5, 0.7}) {
    EnsembleSpec s = free_spec(1.7, h);
    s.y0 = 0.4;
    s.n_paths = 5;
    s.store_paths = 5;
    const EnsembleResult r = simulate_ensemble(s);
    REQUIRE(r.paths.size() == 5);
    for (const StoredPath& p : r.paths) {
      for (std::size_t i = 0; i < p.y.size(); ++i) CHECK(std::abs(p.y[i] - 0.4 - 1.7 * p.fbm[i]) <= 1e-12);
    }
  }
}

TEST_CASE("zero-drift mean is unbiased") {
  for (double h : {0.3, 0.7}) {
    EnsembleSpec s = free_spec(1.0, h);
    s.n_paths = 4000;
    const EnsembleResult r = simulate_ensemble(s);
    for (std::size_t i : {32, 64}) {
      const double t = s.grid().node(i);
      const double se = std::pow(t, h) / std::sqrt(static_cast<double>(s.n_paths));
      CHECK(std::abs(r.mean_y[i]) <= 4.0 * se);
    }
  }
}

TEST_CASE("ensemble results do not depend on the thread count") {
  EnsembleSpec s;
  s.model = {Sigma::cosine(2.0, 1.5, 10.0), Force::pendulum(pendulum_k(), 0.0)};
  s.H = HurstSpec(0.3);
  s.x0 = -0.5 * pi;
  s.n_steps = 64;
  s.n_paths = 1000;
  s.seed = 5;
  const EnsembleResult a = simulate_ensemble(s);
  s.threads = 4;
  const EnsembleResult b = simulate_ensemble(s);
  for (std::size_t i = 0; i < a.mean_x.size(); ++i) {
    CHECK(a.mean_x[i] == b.mean_x[i]);
    CHECK(a.mean_y[i] == b.mean_y[i]);
  }
  const PathPair c = PathPair::from_velocity(GridFn(s.grid(), 0.0), s.x0);
  const TubeResult t1 = tube_probability(s, c, 3.0, 0.1, TubeMode::position_norm);
  s.threads = 1;
  const TubeResult t2 = tube_probability(s, c, 3.0, 0.1, TubeMode::position_norm);
  CHECK(t1.hits == t2.hits);
}

TEST_CASE("diverged paths are counted and excluded") {
  EnsembleSpec s = free_spec(1.0, 0.5);
  s.model.force.f = [](double, double, double y) { return y > 1.0 ? std::numeric_limits<double>::infinity() : 0.0; };
  s.n_paths = 500;
  const EnsembleResult r = simulate_ensemble(s);
  CHECK(r.diverged > 0);
  CHECK(r.valid > 0);
  CHECK(r.valid + r.diverged == 500);
  for (std::size_t i = 0; i < r.mean_y.size(); ++i) CHECK(std::isfinite(r.mean_y[i]));
}

TEST_CASE("tube probability limits and interval") {
  EnsembleSpec s = free_spec(1.0, 0.5);
  s.n_paths = 400;
  const PathPair c = PathPair::from_velocity(GridFn(s.grid(), 0.0), 0.0);
  for (TubeMode m : {TubeMode::position_norm, TubeMode::noise_norm}) {
    CHECK(tube_probability(s, c, std::numeric_limits<double>::infinity(), 0.2, m).p_hat == 1.0);
    CHECK(tube_probability(s, c, 0.0, 0.2, m).p_hat == 0.0);
    const TubeResult t = tube_probability(s, c, 1.5, 0.2, m);
    CHECK(t.ci_low <= t.p_hat);
    CHECK(t.p_hat <= t.ci_high);
    CHECK(t.ci_low > 0.0);
    CHECK(t.ci_high < 1.0);
  }
  CHECK_THROWS_AS(tube_probability(s, c, -1.0, 0.2, TubeMode::noise_norm), std::invalid_argument);
  const PathPair wrong = PathPair::from_velocity(GridFn(TimeGrid(33), 0.0), 0.0);
  CHECK_THROWS_AS(tube_probability(s, wrong, 1.0, 0.2, TubeMode::noise_norm), std::invalid_argument);
}

TEST_CASE("position and noise tubes coincide for the free unit-noise velocity") {
  EnsembleSpec s = free_spec(1.0, 0.5);
  s.n_paths = 1000;
  const PathPair c = PathPair::from_velocity(GridFn(s.grid(), 0.0), 0.0);
  for (double eps : {0.8, 1.2, 2.0}) {
    CHECK(tube_probability(s, c, eps, 0.2, TubeMode::position_norm).hits ==
          tube_probability(s, c, eps, 0.2, TubeMode::noise_norm).hits);
  }
}

TEST_CASE("Wilson interval") {
  const auto [lo, hi] = wilson_interval(50, 100);
  CHECK(lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(hi == doctest::Approx(0.5962).epsilon(1e-3));
  CHECK(wilson_interval(0, 10).first == 0.0);
  CHECK(wilson_interval(10, 10).second == 1.0);
  CHECK_THROWS_AS(wilson_interval(0, 0), std::invalid_argument);
}

TEST_CASE("ratio of a path with itself is zero") {
  EnsembleSpec s = free_spec(1.0, 0.5);
  s.n_paths = 500;
  const PathPair c = PathPair::from_velocity(GridFn(s.grid(), 0.0), 0.0);
  const RatioResult r = om_ratio_experiment(s, c, c, 1.5, 0.2);
  CHECK_FALSE(r.inconclusive);
  CHECK(r.log_ratio_mc == 0.0);
  CHECK(r.log_ratio_se == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.delta_J == 0.0);
}

TEST_CASE("ratio without hits is inconclusive") {
  EnsembleSpec s = free_spec(1.0, 0.5);
  s.n_paths = 100;
  const PathPair c = PathPair::from_velocity(GridFn(s.grid(), 0.0), 0.0);
  const PathPair far = PathPair::from_velocity(GridFn::from(s.grid(), [](double t) { return 50.0 * t; }), 0.0);
  const RatioResult r = om_ratio_experiment(s, c, far, 0.5, 0.2);
  CHECK(r.inconclusive);
  CHECK(std::isnan(r.log_ratio_mc));
  CHECK(r.delta_J == doctest::Approx(50.0 * 50.0 / 2.0).epsilon(1e-9));
  const PathPair shifted = PathPair::from_velocity(GridFn(s.grid(), 1.0), 0.0);
  CHECK_THROWS_AS(om_ratio_experiment(s, c, shifted, 0.5, 0.2), std::invalid_argument);
}

TEST_CASE("small-ball probabilities decay") {
  EnsembleSpec s = free_spec(1.0, 0.5);
  s.n_paths = 5000;
  const SmallBallResult r = small_ball_diagnostic(s, 0.2, {1.4, 1.2, 1.0});
  CHECK(r.trials == 5000);
  CHECK(r.slope < 0.0);
  for (std::size_t k = 1; k < r.points.size(); ++k) CHECK(r.points[k].hits <= r.points[k - 1].hits);
  CHECK_THROWS_AS(small_ball_diagnostic(s, 0.2, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(small_ball_diagnostic(s, 0.2, {1.0, 1.2}), std::invalid_argument);
  CHECK_THROWS_AS(small_ball_diagnostic(s, 0.2, {1e-3, 1e-4}), NumericalFailure);
}

TEST_CASE("small ball without noise is certain") {
  EnsembleSpec s = free_spec(0.0, 0.5);
  s.n_paths = 50;
  const SmallBallResult r = small_ball_diagnostic(s, 0.2, {1.0, 0.5, 0.1});
  CHECK(r.slope == 0.0);
  for (const SmallBallPoint& p : r.points) CHECK(p.p_hat == 1.0);
}

TEST_CASE("ensemble validation") {
  EnsembleSpec s = free_spec(1.0, 0.5);
  s.n_steps = 32;
  CHECK_THROWS_AS(simulate_ensemble(s), std::invalid_argument);
  s.n_steps = 64;
  s.n_paths = 0;
  CHECK_THROWS_AS(simulate_ensemble(s), std::invalid_argument);
}

TEST_CASE("pendulum ensemble mean tracks the noiseless path and converges") {
  EnsembleSpec s;
  s.model = {Sigma::cosine(2.0, 1.5, 10.0), Force::pendulum(pendulum_k(), 0.0)};
  s.H = HurstSpec(0.3);
  s.x0 = -0.5 * pi;
  s.n_steps = 256;
  s.seed = 1;
  const PathPair ref = noiseless_shoot(s.model, s.x0, 0.0, s.grid());

  s.n_paths = 10000;
  const EnsembleResult big = simulate_ensemble(s);
  CHECK(big.diverged == 0);
  CHECK(linf(big.mean_x, ref.psi()) <= 0.15);

  s.n_paths = 1000;
  const EnsembleResult small = simulate_ensemble(s);
  s.n_paths = 40000;
  s.seed = 99;
  const EnsembleResult truth = simulate_ensemble(s);
  CHECK(2.0 * linf(big.mean_x, truth.mean_x) <= linf(small.mean_x, truth.mean_x));
}
