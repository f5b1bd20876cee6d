#pragma once

#include <vector>

#include "omf/grid.hpp"

namespace omf {

/// Which endpoint the Riemann-Liouville operator integrates from:
/// `left` is the 0+ operator, `right` the 1- operator.
enum class Orientation { left, right };
enum class OpKind { integral, derivative };

/// Product-rectangle quadrature for I^alpha applied to piecewise-constant
/// data. The moments of the singular kernel (x - y)^{alpha-1} over each cell
/// are exact, so the operator is exact on cell data and the weights form a
/// lower (left) or upper (right) triangular Toeplitz matrix.
class FracIntegralPlan {
 public:
  enum class Sample { nodes, midpoints };

  FracIntegralPlan(TimeGrid grid, double alpha, Orientation orientation, Sample sample);

  const TimeGrid& grid() const noexcept { return grid_; }
  double alpha() const noexcept { return alpha_; }
  Orientation orientation() const noexcept { return orientation_; }
  Sample sample() const noexcept { return sample_; }

  /// Toeplitz weights: row r of the operator is weights[r - j] against cell j
  /// (left orientation; the right plan is the mirror image).
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Values of I^alpha[c] at the sample points (n nodes or n-1 midpoints).
  std::vector<double> apply(std::span<const double> cells) const;

 private:
  TimeGrid grid_;
  double alpha_;
  Orientation orientation_;
  Sample sample_;
  std::vector<double> weights_;
};

/// I^alpha of a node function; the integrand is taken piecewise constant
/// with the trapezoid cell means. alpha = 1 reproduces cumulative_integral.
GridFn frac_integral(const GridFn& f, double alpha, Orientation orientation);

/// Riemann-Liouville derivative through the Weyl representation, applied to
/// the piecewise-linear interpolant of f with exact cell moments. The value
/// at the singular endpoint is copied from its neighbour.
GridFn frac_derivative(const GridFn& f, double alpha, Orientation orientation);

/// t^a * Op(t^b * f) on the nodes. Power weights on the input are taken at
/// cell midpoints for integrals and at t = dt/2 in place of t = 0 for
/// derivatives; an output weight with a < 0 at t = 0 is evaluated at dt/2.
GridFn weighted_frac_op(const GridFn& f, double alpha, Orientation orientation, OpKind kind,
                        double pre_power, double post_power);

/// |int f I^alpha_{0+} g - int (I^alpha_{1-} f) g| with trapezoid outer sums.
double frac_integration_by_parts_residual(const GridFn& f, const GridFn& g, double alpha);

// Cell-level operators. These are the building blocks of the K_H family: they
// take piecewise-constant data and return midpoint (CellFn) or node values.

GridFn integral_at_nodes(const CellFn& c, double alpha, Orientation orientation);
CellFn integral_at_midpoints(const CellFn& c, double alpha, Orientation orientation);

/// D^alpha at the midpoints as the cell slope of I^{1-alpha} at the nodes.
CellFn derivative_at_midpoints(const CellFn& c, double alpha, Orientation orientation);

/// s^a * Op(s^b * c) with every power weight evaluated at cell midpoints.
CellFn weighted_cell_op(const CellFn& c, double alpha, Orientation orientation, OpKind kind,
                        double pre_power, double post_power);

/// s^p at the cell midpoints.
CellFn midpoint_power(const TimeGrid& grid, double p);

}  // namespace omf
