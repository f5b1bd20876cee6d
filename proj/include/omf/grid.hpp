#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace omf {

/// Raised when a numerical routine produces a non-finite value or cannot
/// make progress. `index()` names the grid node (or iteration) at fault.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Uniform grid on [0,1] with n nodes t_i = i/(n-1).
///
/// Quantities that live on the nodes are `GridFn`; quantities that are
/// constant on each cell [t_j, t_{j+1}] and sampled at the cell midpoints
/// are `CellFn`. Most fractional operators in this library map cell data to
/// node or midpoint data, which keeps weight factors s^{-a} away from s = 0.
class TimeGrid {
 public:
  explicit TimeGrid(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::size_t cells() const noexcept { return n_ - 1; }
  double step() const noexcept { return dt_; }

  double node(std::size_t i) const noexcept {
    return i + 1 == n_ ? 1.0 : static_cast<double>(i) * dt_;
  }
  double midpoint(std::size_t j) const noexcept { return (static_cast<double>(j) + 0.5) * dt_; }

  std::vector<double> nodes() const;
  std::vector<double> midpoints() const;

  bool operator==(const TimeGrid& other) const noexcept { return n_ == other.n_; }

 private:
  std::size_t n_;
  double dt_;
};

TimeGrid make_grid(std::size_t n);

/// Real function sampled on the nodes of a TimeGrid.
class GridFn {
 public:
  GridFn(TimeGrid grid, std::vector<double> values);
  explicit GridFn(TimeGrid grid, double constant = 0.0);

  static GridFn from(const TimeGrid& grid, const std::function<double(double)>& f);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double front() const noexcept { return values_.front(); }
  double back() const noexcept { return values_.back(); }

  double sup_norm() const noexcept;

  GridFn& operator+=(const GridFn& other);
  GridFn& operator-=(const GridFn& other);
  GridFn& operator*=(double c) noexcept;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

GridFn operator+(GridFn a, const GridFn& b);
GridFn operator-(GridFn a, const GridFn& b);
GridFn operator*(double c, GridFn a);
GridFn operator*(GridFn a, const GridFn& b);  // pointwise

/// Piecewise-constant function on the cells of a TimeGrid, represented by
/// its values at the cell midpoints.
class CellFn {
 public:
  CellFn(TimeGrid grid, std::vector<double> values);
  explicit CellFn(TimeGrid grid, double constant = 0.0);

  static CellFn from(const TimeGrid& grid, const std::function<double(double)>& f);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator[](std::size_t j) const noexcept { return values_[j]; }
  double& operator[](std::size_t j) noexcept { return values_[j]; }

  CellFn& operator+=(const CellFn& other);
  CellFn& operator-=(const CellFn& other);
  CellFn& operator*=(double c) noexcept;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

CellFn operator+(CellFn a, const CellFn& b);
CellFn operator-(CellFn a, const CellFn& b);
CellFn operator*(double c, CellFn a);
CellFn operator*(CellFn a, const CellFn& b);  // pointwise

/// Trapezoid mean of the two node values bounding each cell.
CellFn cell_average(const GridFn& f);
/// Difference quotient (f_{j+1} - f_j) / dt on each cell.
CellFn cell_slope(const GridFn& f);
/// Exact antiderivative of a piecewise-constant function, zero at t = 0.
GridFn cumulate(const CellFn& c);

/// Trapezoid-rule running integral of f from 0; zero at t = 0.
GridFn cumulative_integral(const GridFn& f);
/// Second-order finite differences; exact for quadratics. Needs n >= 3.
GridFn derivative(const GridFn& f);

double integrate(const GridFn& f);  // trapezoid over [0,1]
double integrate(const CellFn& c);  // midpoint rule over [0,1]

enum class HolderMode { exact, dyadic };

struct HolderResult {
  double value = 0.0;
  bool exact = true;  // false when the dyadic-pair approximation was used
};

/// Discrete Holder seminorm max_{i<j} |f_j - f_i| / (t_j - t_i)^beta.
///
/// `exact` scans every node pair (O(n^2) with pruning). `dyadic` restricts the
/// scan to lags that are powers of two; it is a lower bound and is flagged as
/// such in the result. Grids above 8192 nodes default to the dyadic mode.
HolderResult holder_seminorm(const GridFn& f, double beta);
HolderResult holder_seminorm(const GridFn& f, double beta, HolderMode mode);
double holder_seminorm(std::span<const double> values, double dt, double beta);

/// True iff the exact discrete seminorm of `values` is <= bound. Stops at the
/// first violating pair, so rejections are cheap.
bool holder_within(std::span<const double> values, double dt, double beta, double bound);

/// Norm on C_0^beta for 1 < beta < 2: the (beta-1)-seminorm of f'.
double holder_norm_shifted(const GridFn& f, double beta);

}  // namespace omf
