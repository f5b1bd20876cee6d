#include "omf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace omf {

namespace {

void require_same_grid(const TimeGrid& a, const TimeGrid& b) {
  if (!(a == b)) throw std::invalid_argument("grid functions live on different grids");
}

void require_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw NumericalFailure("non-finite grid value", i);
  }
}

// Exact pair scan with suffix-range pruning. For a fixed left index i the
// ratio at lag k is bounded by the spread between f_i and the suffix
// extremes from i+k on, times (k dt)^-beta; both factors shrink with k.
// Returns the seminorm, or any value > stop_above as soon as one is found.
double scan_pairs(std::span<const double> f, double dt, double beta, double stop_above) {
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  std::vector<double> weight(n);
  for (std::size_t k = 1; k < n; ++k) weight[k] = std::pow(static_cast<double>(k) * dt, -beta);
  std::vector<double> suf_max(n), suf_min(n);
  suf_max[n - 1] = suf_min[n - 1] = f[n - 1];
  for (std::size_t m = n - 1; m-- > 0;) {
    suf_max[m] = std::max(suf_max[m + 1], f[m]);
    suf_min[m] = std::min(suf_min[m + 1], f[m]);
  }
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = std::abs(f[i + 1] - f[i]) * weight[1];
    best = std::max(best, d);
  }
  if (best > stop_above) return best;
  for (std::size_t i = 0; i + 2 < n; ++i) {
    const double fi = f[i];
    for (std::size_t k = 2; i + k < n; ++k) {
      const double spread = std::max(suf_max[i + k] - fi, fi - suf_min[i + k]);
      if (spread * weight[k] <= best) break;
      const double d = std::abs(f[i + k] - fi) * weight[k];
      if (d > best) {
        best = d;
        if (best > stop_above) return best;
      }
    }
  }
  return best;
}

double scan_dyadic(std::span<const double> f, double dt, double beta) {
  double best = 0.0;
  for (std::size_t k = 1; k < f.size(); k *= 2) {
    const double w = std::pow(static_cast<double>(k) * dt, -beta);
    for (std::size_t i = 0; i + k < f.size(); ++i) best = std::max(best, std::abs(f[i + k] - f[i]) * w);
  }
  return best;
}

void check_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("Holder exponent must lie in (0,1]");
}

}  // namespace

TimeGrid::TimeGrid(std::size_t n) : n_(n), dt_(0.0) {
  if (n < 2) throw std::invalid_argument("a time grid needs at least two nodes");
  dt_ = 1.0 / static_cast<double>(n - 1);
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> t(n_);
  for (std::size_t i = 0; i < n_; ++i) t[i] = node(i);
  return t;
}

std::vector<double> TimeGrid::midpoints() const {
  std::vector<double> t(n_ - 1);
  for (std::size_t j = 0; j + 1 < n_; ++j) t[j] = midpoint(j);
  return t;
}

TimeGrid make_grid(std::size_t n) { return TimeGrid(n); }

// ---------------------------------------------------------------- GridFn

GridFn::GridFn(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw std::invalid_argument("GridFn length does not match grid");
  require_finite(values_);
}

GridFn::GridFn(TimeGrid grid, double constant) : grid_(grid), values_(grid.size(), constant) {}

GridFn GridFn::from(const TimeGrid& grid, const std::function<double(double)>& f) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.node(i));
  return GridFn(grid, std::move(v));
}

double GridFn::sup_norm() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

GridFn& GridFn::operator+=(const GridFn& other) {
  require_same_grid(grid_, other.grid_);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GridFn& GridFn::operator-=(const GridFn& other) {
  require_same_grid(grid_, other.grid_);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

GridFn& GridFn::operator*=(double c) noexcept {
  for (double& v : values_) v *= c;
  return *this;
}

GridFn operator+(GridFn a, const GridFn& b) { return a += b; }
GridFn operator-(GridFn a, const GridFn& b) { return a -= b; }
GridFn operator*(double c, GridFn a) { return a *= c; }

GridFn operator*(GridFn a, const GridFn& b) {
  require_same_grid(a.grid(), b.grid());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return a;
}

// ---------------------------------------------------------------- CellFn

CellFn::CellFn(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.cells()) throw std::invalid_argument("CellFn length does not match grid");
  require_finite(values_);
}

CellFn::CellFn(TimeGrid grid, double constant) : grid_(grid), values_(grid.cells(), constant) {}

CellFn CellFn::from(const TimeGrid& grid, const std::function<double(double)>& f) {
  std::vector<double> v(grid.cells());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(grid.midpoint(j));
  return CellFn(grid, std::move(v));
}

CellFn& CellFn::operator+=(const CellFn& other) {
  require_same_grid(grid_, other.grid_);
  for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += other.values_[j];
  return *this;
}

CellFn& CellFn::operator-=(const CellFn& other) {
  require_same_grid(grid_, other.grid_);
  for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= other.values_[j];
  return *this;
}

CellFn& CellFn::operator*=(double c) noexcept {
  for (double& v : values_) v *= c;
  return *this;
}

CellFn operator+(CellFn a, const CellFn& b) { return a += b; }
CellFn operator-(CellFn a, const CellFn& b) { return a -= b; }
CellFn operator*(double c, CellFn a) { return a *= c; }

CellFn operator*(CellFn a, const CellFn& b) {
  require_same_grid(a.grid(), b.grid());
  for (std::size_t j = 0; j < a.size(); ++j) a[j] *= b[j];
  return a;
}

// ---------------------------------------------------------------- calculus

CellFn cell_average(const GridFn& f) {
  std::vector<double> c(f.grid().cells());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = 0.5 * (f[j] + f[j + 1]);
  return CellFn(f.grid(), std::move(c));
}

CellFn cell_slope(const GridFn& f) {
  const double inv = 1.0 / f.grid().step();
  std::vector<double> c(f.grid().cells());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = (f[j + 1] - f[j]) * inv;
  return CellFn(f.grid(), std::move(c));
}

GridFn cumulate(const CellFn& c) {
  const double dt = c.grid().step();
  std::vector<double> v(c.grid().size());
  v[0] = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) v[j + 1] = v[j] + dt * c[j];
  return GridFn(c.grid(), std::move(v));
}

GridFn cumulative_integral(const GridFn& f) { return cumulate(cell_average(f)); }

GridFn derivative(const GridFn& f) {
  const std::size_t n = f.size();
  if (n < 3) throw std::invalid_argument("derivative needs at least three nodes");
  const double h = f.grid().step();
  std::vector<double> d(n);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return GridFn(f.grid(), std::move(d));
}

double integrate(const GridFn& f) {
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * f.grid().step();
}

double integrate(const CellFn& c) {
  double s = 0.0;
  for (double v : c.values()) s += v;
  return s * c.grid().step();
}

// ---------------------------------------------------------------- Holder

HolderResult holder_seminorm(const GridFn& f, double beta) {
  return holder_seminorm(f, beta, f.size() > 8192 ? HolderMode::dyadic : HolderMode::exact);
}

HolderResult holder_seminorm(const GridFn& f, double beta, HolderMode mode) {
  check_beta(beta);
  const double dt = f.grid().step();
  if (mode == HolderMode::dyadic) return {scan_dyadic(f.values(), dt, beta), false};
  return {scan_pairs(f.values(), dt, beta, std::numeric_limits<double>::infinity()), true};
}

double holder_seminorm(std::span<const double> values, double dt, double beta) {
  check_beta(beta);
  return scan_pairs(values, dt, beta, std::numeric_limits<double>::infinity());
}

bool holder_within(std::span<const double> values, double dt, double beta, double bound) {
  check_beta(beta);
  if (!(bound >= 0.0)) return false;
  return scan_pairs(values, dt, beta, bound) <= bound;
}

double holder_norm_shifted(const GridFn& f, double beta) {
  if (!(beta > 1.0 && beta < 2.0)) throw std::invalid_argument("shifted Holder norm needs beta in (1,2)");
  return holder_seminorm(derivative(f), beta - 1.0).value;
}

}  // namespace omf
