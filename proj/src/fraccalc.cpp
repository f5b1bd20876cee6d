#include "omf/fraccalc.hpp"

#include <algorithm>
#include <cmath>

namespace omf {

namespace {

void check_integral_order(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("fractional integral order must lie in (0,1]");
}

void check_derivative_order(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fractional derivative order must lie in (0,1)");
}

std::vector<double> reversed(std::span<const double> v) { return {v.rbegin(), v.rend()}; }

// Left derivative of the piecewise-linear interpolant through the Weyl form.
// On cell [t_j, t_{j+1}] write f(x) - f(y) = A + s_j (x - y) with
// A = f_i - f_j - s_j (t_i - t_j); both pieces integrate in closed form.
std::vector<double> weyl_left(std::span<const double> f, double dt, double alpha) {
  const std::size_t n = f.size();
  std::vector<double> neg(n), pos(n);
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    neg[k] = std::pow(kk, -alpha);
    pos[k] = std::pow(kk, 1.0 - alpha);
  }
  const double dneg = std::pow(dt, -alpha);
  const double dpos = std::pow(dt, 1.0 - alpha);
  const double ratio = alpha / (1.0 - alpha);
  const double scale = 1.0 / std::tgamma(1.0 - alpha);

  std::vector<double> out(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    double sum = f[i] * dneg * neg[i];
    for (std::size_t j = 0; j < i; ++j) {
      const std::size_t k0 = i - j;
      const std::size_t k1 = k0 - 1;
      const double diff = f[j + 1] - f[j];
      const double slope = diff / dt;
      double term = ratio * slope * dpos * (pos[k0] - (k1 > 0 ? pos[k1] : 0.0));
      if (k1 > 0) {
        const double a = f[i] - f[j] - diff * static_cast<double>(k0);
        term += a * dneg * (neg[k1] - neg[k0]);
      }
      sum += term;
    }
    out[i] = sum * scale;
    if (!std::isfinite(out[i])) throw NumericalFailure("fractional derivative is not finite", i);
  }
  out[0] = n > 1 ? out[1] : 0.0;
  return out;
}

}  // namespace

// ---------------------------------------------------------------- plan

FracIntegralPlan::FracIntegralPlan(TimeGrid grid, double alpha, Orientation orientation, Sample sample)
    : grid_(grid), alpha_(alpha), orientation_(orientation), sample_(sample) {
  check_integral_order(alpha);
  const double dt = grid_.step();
  const double scale = std::pow(dt, alpha) / std::tgamma(alpha + 1.0);
  const std::size_t m = grid_.cells();
  if (sample_ == Sample::nodes) {
    weights_.assign(m + 1, 0.0);
    double prev = 0.0;
    for (std::size_t k = 1; k <= m; ++k) {
      const double cur = std::pow(static_cast<double>(k), alpha);
      weights_[k] = scale * (cur - prev);
      prev = cur;
    }
  } else {
    weights_.assign(m, 0.0);
    double prev = std::pow(0.5, alpha);
    weights_[0] = scale * prev;
    for (std::size_t k = 1; k < m; ++k) {
      const double cur = std::pow(static_cast<double>(k) + 0.5, alpha);
      weights_[k] = scale * (cur - prev);
      prev = cur;
    }
  }
}

std::vector<double> FracIntegralPlan::apply(std::span<const double> cells) const {
  const std::size_t m = grid_.cells();
  if (cells.size() != m) throw std::invalid_argument("cell data does not match the plan grid");
  std::vector<double> c = orientation_ == Orientation::left ? std::vector<double>(cells.begin(), cells.end())
                                                            : reversed(cells);
  std::vector<double> out;
  if (sample_ == Sample::nodes) {
    out.assign(m + 1, 0.0);
    for (std::size_t i = 1; i <= m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < i; ++j) s += c[j] * weights_[i - j];
      out[i] = s;
    }
  } else {
    out.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j <= i; ++j) s += c[j] * weights_[i - j];
      out[i] = s;
    }
  }
  if (orientation_ == Orientation::right) std::reverse(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- cell ops

GridFn integral_at_nodes(const CellFn& c, double alpha, Orientation orientation) {
  FracIntegralPlan plan(c.grid(), alpha, orientation, FracIntegralPlan::Sample::nodes);
  return GridFn(c.grid(), plan.apply(c.values()));
}

CellFn integral_at_midpoints(const CellFn& c, double alpha, Orientation orientation) {
  FracIntegralPlan plan(c.grid(), alpha, orientation, FracIntegralPlan::Sample::midpoints);
  return CellFn(c.grid(), plan.apply(c.values()));
}

CellFn derivative_at_midpoints(const CellFn& c, double alpha, Orientation orientation) {
  check_derivative_order(alpha);
  if (orientation == Orientation::right) {
    CellFn flipped(c.grid(), reversed(c.values()));
    CellFn d = derivative_at_midpoints(flipped, alpha, Orientation::left);
    return CellFn(c.grid(), reversed(d.values()));
  }
  return cell_slope(integral_at_nodes(c, 1.0 - alpha, Orientation::left));
}

CellFn midpoint_power(const TimeGrid& grid, double p) {
  std::vector<double> v(grid.cells());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::pow(grid.midpoint(j), p);
  return CellFn(grid, std::move(v));
}

CellFn weighted_cell_op(const CellFn& c, double alpha, Orientation orientation, OpKind kind, double pre_power,
                        double post_power) {
  CellFn g = post_power == 0.0 ? c : midpoint_power(c.grid(), post_power) * c;
  CellFn r = kind == OpKind::integral ? integral_at_midpoints(g, alpha, orientation)
                                      : derivative_at_midpoints(g, alpha, orientation);
  return pre_power == 0.0 ? r : midpoint_power(c.grid(), pre_power) * r;
}

// ---------------------------------------------------------------- node ops

GridFn frac_integral(const GridFn& f, double alpha, Orientation orientation) {
  return integral_at_nodes(cell_average(f), alpha, orientation);
}

GridFn frac_derivative(const GridFn& f, double alpha, Orientation orientation) {
  check_derivative_order(alpha);
  const double dt = f.grid().step();
  if (orientation == Orientation::left) return GridFn(f.grid(), weyl_left(f.values(), dt, alpha));
  std::vector<double> d = weyl_left(reversed(f.values()), dt, alpha);
  std::reverse(d.begin(), d.end());
  return GridFn(f.grid(), std::move(d));
}

GridFn weighted_frac_op(const GridFn& f, double alpha, Orientation orientation, OpKind kind, double pre_power,
                        double post_power) {
  const TimeGrid& grid = f.grid();
  const double dt = grid.step();
  const double half = 0.5 * dt;
  std::vector<double> out;

  if (kind == OpKind::integral) {
    check_integral_order(alpha);
    CellFn c = cell_average(f);
    if (post_power != 0.0) c = midpoint_power(grid, post_power) * c;
    out = FracIntegralPlan(grid, alpha, orientation, FracIntegralPlan::Sample::nodes).apply(c.values());
    if (pre_power < 0.0) {
      const auto mid = FracIntegralPlan(grid, alpha, orientation, FracIntegralPlan::Sample::midpoints).apply(c.values());
      out[0] = mid[0] * std::pow(half, pre_power);
    } else if (pre_power > 0.0) {
      out[0] = 0.0;
    }
  } else {
    check_derivative_order(alpha);
    std::vector<double> g(f.values().begin(), f.values().end());
    if (post_power != 0.0) {
      for (std::size_t i = 1; i < g.size(); ++i) g[i] *= std::pow(grid.node(i), post_power);
      g[0] = post_power < 0.0 ? g[0] * std::pow(half, post_power) : 0.0;
    }
    const GridFn d = frac_derivative(GridFn(grid, std::move(g)), alpha, orientation);
    out.assign(d.values().begin(), d.values().end());
    if (pre_power > 0.0) out[0] = 0.0;
  }

  if (pre_power != 0.0) {
    for (std::size_t i = 1; i < out.size(); ++i) out[i] *= std::pow(grid.node(i), pre_power);
    if (kind == OpKind::derivative && pre_power < 0.0) out[0] = out[1];
  }
  return GridFn(grid, std::move(out));
}

double frac_integration_by_parts_residual(const GridFn& f, const GridFn& g, double alpha) {
  check_integral_order(alpha);
  const GridFn left = frac_integral(g, alpha, Orientation::left);
  const GridFn right = frac_integral(f, alpha, Orientation::right);
  return std::abs(integrate(f * left) - integrate(right * g));
}

}  // namespace omf
