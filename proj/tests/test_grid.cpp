#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omf/grid.hpp"
#include "omf/rng.hpp"

using namespace omf;

namespace {

GridFn random_walk(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) v[i] = v[i - 1] + rng.normal() / std::sqrt(static_cast<double>(n));
  return GridFn(TimeGrid(n), std::move(v));
}

}  // namespace

TEST_CASE("grid nodes, midpoints and the last node") {
  const TimeGrid g(11);
  CHECK(g.size() == 11);
  CHECK(g.cells() == 10);
  CHECK(g.node(10) == 1.0);
  CHECK(g.node(3) == doctest::Approx(0.3));
  CHECK(g.midpoint(0) == doctest::Approx(0.05));
  CHECK_THROWS_AS(TimeGrid(1), std::invalid_argument);
}

TEST_CASE("numerical failure carries its index") {
  const NumericalFailure e("bad value", 7);
  CHECK(e.index() == 7);
  CHECK(std::string(e.what()).find("7") != std::string::npos);
}

TEST_CASE("cumulate and cell_slope are inverse to each other") {
  const TimeGrid g(65);
  const GridFn f = random_walk(65, 3);
  const GridFn back = cumulate(cell_slope(f));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(back[i] + f[0] == doctest::Approx(f[i]).epsilon(1e-12));
}

TEST_CASE("trapezoid integrals are exact on affine functions") {
  const TimeGrid g(33);
  const GridFn f = GridFn::from(g, [](double t) { return 2.0 + 3.0 * t; });
  const GridFn F = cumulative_integral(f);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = g.node(i);
    CHECK(F[i] == doctest::Approx(2.0 * t + 1.5 * t * t).epsilon(1e-13));
  }
  CHECK(integrate(f) == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(integrate(CellFn::from(g, [](double t) { return 2.0 + 3.0 * t; })) == doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("second-order derivative is exact on quadratics") {
  const TimeGrid g(17);
  const GridFn d = derivative(GridFn::from(g, [](double t) { return 1.0 - t + 4.0 * t * t; }));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(d[i] == doctest::Approx(-1.0 + 8.0 * g.node(i)).epsilon(1e-10));
}

TEST_CASE("holder seminorm of the identity is one") {
  const GridFn f = GridFn::from(TimeGrid(129), [](double t) { return t; });
  for (double beta : {0.1, 0.25, 0.5}) CHECK(holder_seminorm(f, beta).value == doctest::Approx(1.0));
}

TEST_CASE("shifted holder norm reads the derivative") {
  const GridFn f = GridFn::from(TimeGrid(257), [](double t) { return 0.5 * t * t; });
  CHECK(holder_norm_shifted(f, 1.5) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(holder_norm_shifted(f, 0.5), std::invalid_argument);
}

TEST_CASE("holder_within agrees with the seminorm and dyadic is a lower bound") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GridFn f = random_walk(257, seed);
    const double dt = f.grid().step();
    const HolderResult exact = holder_seminorm(f, 0.3);
    const HolderResult dyadic = holder_seminorm(f, 0.3, HolderMode::dyadic);
    CHECK(exact.exact);
    CHECK_FALSE(dyadic.exact);
    CHECK(dyadic.value <= exact.value);
    CHECK(holder_within(f.values(), dt, 0.3, exact.value));
    CHECK_FALSE(holder_within(f.values(), dt, 0.3, exact.value * (1.0 - 1e-9)));
    CHECK(holder_seminorm(f.values(), dt, 0.3) == exact.value);
  }
}

TEST_CASE("holder_within handles infinite and zero bounds") {
  const GridFn f = random_walk(65, 1);
  const double dt = f.grid().step();
  CHECK(holder_within(f.values(), dt, 0.2, std::numeric_limits<double>::infinity()));
  CHECK_FALSE(holder_within(f.values(), dt, 0.2, 0.0));
  const GridFn z(TimeGrid(65), 0.0);
  CHECK(holder_within(z.values(), dt, 0.2, 0.0));
}
