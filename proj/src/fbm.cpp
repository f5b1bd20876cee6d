#include "omf/fbm.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "omf/fraccalc.hpp"

namespace omf {

namespace {

bool near_zero(double v, double scale) { return std::abs(v) <= 1e-12 * (1.0 + scale); }

CellFn sigma_cells(const GridFn& sigma) {
  CellFn s = cell_average(sigma);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == 0.0) throw NumericalFailure("noise intensity vanishes on a cell", j);
  }
  return s;
}

// Weighted composition s^a I^a s^-a at the cell midpoints; the common inner
// factor of both fractional branches of K_H.
CellFn kh_inner(const CellFn& h, double a) {
  return weighted_cell_op(h, a, Orientation::left, OpKind::integral, a, -a);
}

std::shared_ptr<const Eigen::MatrixXd> build_cholesky(const HurstSpec& H, const TimeGrid& grid) {
  const std::size_t m = grid.cells();
  Eigen::MatrixXd R(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      R(i, j) = R(j, i) = covariance(grid.node(i + 1), grid.node(j + 1), H);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  double jitter = 1e-14;
  while (llt.info() != Eigen::Success) {
    if (jitter > 1e-10) throw NumericalFailure("fBm covariance is not positive definite", m);
    llt.compute(R + jitter * Eigen::MatrixXd::Identity(m, m));
    jitter *= 10.0;
  }
  Eigen::MatrixXd L = llt.matrixL();
  L /= std::sqrt(grid.step());
  return std::make_shared<const Eigen::MatrixXd>(std::move(L));
}

std::shared_ptr<const Eigen::MatrixXd> build_kernel(const HurstSpec& H, const TimeGrid& grid) {
  const std::size_t m = grid.cells();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t r = 0; r < m; ++r) {
    const double t = grid.node(r + 1);
    for (std::size_t j = 0; j <= r; ++j) K(r, j) = kernel_KH(t, grid.midpoint(j), H);
  }
  return std::make_shared<const Eigen::MatrixXd>(std::move(K));
}

std::shared_ptr<const Eigen::MatrixXd> cached_map(const HurstSpec& H, const TimeGrid& grid, SampleMethod method) {
  using Key = std::tuple<double, std::size_t, int>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const Eigen::MatrixXd>> cache;
  const Key key{H.H(), grid.size(), static_cast<int>(method)};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto built = method == SampleMethod::cholesky ? build_cholesky(H, grid) : build_kernel(H, grid);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(built)).first->second;
}

// Antiderivatives of |u|^p and |u|^p u, continuous through u = 0 for p > -1.
double moment0(double u, double p) { return std::copysign(std::pow(std::abs(u), p + 1.0), u) / (p + 1.0); }
double moment1(double u, double p) { return std::pow(std::abs(u), p + 2.0) / (p + 2.0); }

// int_0^1 g(s) |t - s|^p ds for the piecewise-linear interpolant of g.
double singular_convolution(const GridFn& g, double t, double p) {
  const TimeGrid& grid = g.grid();
  const double dt = grid.step();
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < g.size(); ++j) {
    const double slope = (g[j + 1] - g[j]) / dt;
    const double tj = grid.node(j);
    const double a = g[j] + slope * (t - tj);
    const double u1 = tj - t;
    const double u2 = grid.node(j + 1) - t;
    total += a * (moment0(u2, p) - moment0(u1, p)) + slope * (moment1(u2, p) - moment1(u1, p));
  }
  return total;
}

double isometry_exact(const GridFn& f, const GridFn& g, const HurstSpec& H) {
  const TimeGrid& grid = f.grid();
  const double h = H.H();
  if (H.regime() == Regime::regular) {
    const double p = 2.0 * h - 2.0;
    const double dt = grid.step();
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) {
      const double t0 = grid.node(j);
      const double f0 = f[j];
      const double df = f[j + 1] - f[j];
      total += boost::math::quadrature::gauss<double, 8>::integrate(
          [&](double t) { return (f0 + df * (t - t0) / dt) * singular_convolution(g, t, p); }, t0, grid.node(j + 1));
    }
    return h * (2.0 * h - 1.0) * total;
  }
  const std::size_t m = grid.cells();
  const double scale = std::pow(grid.step(), 2.0 * h);
  auto inc_cov = [&](std::size_t i, std::size_t j) {
    const double k = std::abs(static_cast<double>(i) - static_cast<double>(j));
    return 0.5 * scale * (std::pow(k + 1.0, 2.0 * h) + std::pow(std::abs(k - 1.0), 2.0 * h) - 2.0 * std::pow(k, 2.0 * h));
  };
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) total += f[i] * g[j] * inc_cov(i, j);
  }
  return total;
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::singular: return "singular";
    case Regime::standard: return "standard";
    case Regime::regular: return "regular";
  }
  return "unknown";
}

std::string to_string(SampleMethod m) { return m == SampleMethod::cholesky ? "cholesky" : "kernel_synthesis"; }

HurstSpec::HurstSpec(double H) : H_(H), alpha_(std::abs(H - 0.5)), regime_(Regime::standard) {
  if (!(H > 0.25 && H < 1.0)) throw std::invalid_argument("Hurst index must lie in (1/4, 1)");
  if (H < 0.5) regime_ = Regime::singular;
  if (H > 0.5) regime_ = Regime::regular;
}

double covariance(double t, double s, const HurstSpec& H) {
  const double e = 2.0 * H.H();
  return 0.5 * (std::pow(std::abs(t), e) + std::pow(std::abs(s), e) - std::pow(std::abs(t - s), e));
}

double c_H(const HurstSpec& H) {
  if (H.regime() != Regime::regular) throw std::invalid_argument("c_H is defined for H > 1/2");
  const double h = H.H();
  return std::sqrt(h * (2.0 * h - 1.0) / boost::math::beta(2.0 - 2.0 * h, h - 0.5));
}

double b_H(const HurstSpec& H) {
  if (H.regime() != Regime::singular) throw std::invalid_argument("b_H is defined for H < 1/2");
  const double h = H.H();
  return std::sqrt(2.0 * h / ((1.0 - 2.0 * h) * boost::math::beta(1.0 - 2.0 * h, h + 0.5)));
}

double kh_constant(const HurstSpec& H) {
  switch (H.regime()) {
    case Regime::regular: return c_H(H) * std::tgamma(H.alpha());
    case Regime::singular: return b_H(H) * std::tgamma(1.0 - H.alpha());
    case Regime::standard: break;
  }
  return 1.0;
}

double kernel_KH(double t, double s, const HurstSpec& H) {
  if (!(s > 0.0 && s < t)) throw std::invalid_argument("kernel_KH needs 0 < s < t");
  const double a = H.alpha();
  switch (H.regime()) {
    case Regime::standard: return 1.0;
    case Regime::regular: {
      // u = s + (t - s) w^{1/a} removes the (u - s)^{a-1} endpoint singularity.
      const double span = t - s;
      auto integrand = [&](double w) { return std::pow(s + span * std::pow(w, 1.0 / a), a); };
      const double inner = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, 1.0, 15, 1e-13);
      return c_H(H) * std::pow(s, -a) * std::pow(span, a) / a * inner;
    }
    case Regime::singular: {
      // int_s^t (u-s)^{-a} u^{-a-1} du = s^{-2a} B_{1 - s/t}(2a, 1 - a) after u = s / v.
      const double tail = boost::math::betac(2.0 * a, 1.0 - a, s / t);
      return b_H(H) * (std::pow(t / s, -a) * std::pow(t - s, -a) + a * std::pow(s, -a) * tail);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------- operators

GridFn apply_KH(const CellFn& h, const HurstSpec& H) {
  const double a = H.alpha();
  switch (H.regime()) {
    case Regime::standard: return cumulate(h);
    case Regime::regular: return cumulate(kh_constant(H) * kh_inner(h, a));
    case Regime::singular: return integral_at_nodes(kh_constant(H) * kh_inner(h, a), 1.0 - 2.0 * a, Orientation::left);
  }
  return GridFn(h.grid());
}

GridFn apply_KH(const GridFn& h, const HurstSpec& H) { return apply_KH(cell_average(h), H); }

CellFn kh_inverse_slopes(const CellFn& d, const HurstSpec& H) {
  const double a = H.alpha();
  switch (H.regime()) {
    case Regime::standard: return d;
    case Regime::regular:
      return (1.0 / kh_constant(H)) * weighted_cell_op(d, a, Orientation::left, OpKind::derivative, a, -a);
    case Regime::singular:
      return (1.0 / kh_constant(H)) * weighted_cell_op(d, a, Orientation::left, OpKind::integral, -a, a);
  }
  return d;
}

CellFn apply_KH_inverse(const GridFn& h, const HurstSpec& H) {
  if (!near_zero(h.front(), h.sup_norm())) throw std::invalid_argument("K_H inverse needs h(0) = 0");
  return kh_inverse_slopes(cell_slope(h), H);
}

GridFn apply_KH_sigma(const CellFn& f, const GridFn& sigma, const HurstSpec& H) {
  const GridFn k = apply_KH(f, H);
  const CellFn s = cell_average(sigma);
  std::vector<double> out(k.size(), 0.0);
  for (std::size_t j = 0; j + 1 < out.size(); ++j) out[j + 1] = out[j] + s[j] * (k[j + 1] - k[j]);
  return GridFn(k.grid(), std::move(out));
}

GridFn apply_KH_sigma(const GridFn& f, const GridFn& sigma, const HurstSpec& H) {
  return apply_KH_sigma(cell_average(f), sigma, H);
}

CellFn apply_KH_sigma_inverse(const GridFn& g, const GridFn& sigma, const HurstSpec& H) {
  if (!near_zero(g.front(), g.sup_norm())) throw std::invalid_argument("K_H^sigma inverse needs g(0) = 0");
  const CellFn s = sigma_cells(sigma);
  CellFn d = cell_slope(g);
  for (std::size_t j = 0; j < d.size(); ++j) d[j] /= s[j];
  return kh_inverse_slopes(d, H);
}

CellFn velocity_dot(const GridFn& phi, double y0, const GridFn& sigma, const HurstSpec& H) {
  if (!near_zero(phi.front() - y0, std::abs(y0))) throw std::invalid_argument("velocity must start at y0");
  const CellFn s = sigma_cells(sigma);
  CellFn d = cell_slope(phi);
  for (std::size_t j = 0; j < d.size(); ++j) d[j] /= s[j];
  return kh_inverse_slopes(d, H);
}

// ---------------------------------------------------------------- sampling

FbmSampler::FbmSampler(const HurstSpec& H, const TimeGrid& grid, SampleMethod method)
    : hurst_(H), grid_(grid), method_(method) {
  if (method == SampleMethod::cholesky && grid.size() > max_cholesky_nodes) {
    throw std::invalid_argument("Cholesky sampling is limited to 4097 nodes");
  }
  if (H.regime() != Regime::standard) map_ = cached_map(H, grid, method);
}

void FbmSampler::draw(RandomStream& rng, std::span<double> wiener, std::span<double> fbm) const {
  const std::size_t m = grid_.cells();
  if (wiener.size() != m + 1 || fbm.size() != m + 1) throw std::invalid_argument("output spans do not match grid");
  const double sq = std::sqrt(grid_.step());
  Eigen::VectorXd dw(m);
  wiener[0] = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    dw[j] = sq * rng.normal();
    wiener[j + 1] = wiener[j] + dw[j];
  }
  fbm[0] = 0.0;
  if (!map_) {
    for (std::size_t i = 1; i <= m; ++i) fbm[i] = wiener[i];
    return;
  }
  Eigen::Map<Eigen::VectorXd> out(fbm.data() + 1, static_cast<Eigen::Index>(m));
  out.noalias() = map_->triangularView<Eigen::Lower>() * dw;
}

FbmPath FbmSampler::sample(std::uint64_t seed, std::uint64_t stream) const {
  RandomStream rng(seed, stream);
  std::vector<double> w(grid_.size()), b(grid_.size());
  draw(rng, w, b);
  return FbmPath{grid_, GridFn(grid_, std::move(w)), GridFn(grid_, std::move(b)), hurst_, seed, stream, method_};
}

FbmPath sample_fbm(const HurstSpec& H, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream,
                   SampleMethod method) {
  return FbmSampler(H, grid, method).sample(seed, stream);
}

GridFn stieltjes_left(const GridFn& integrand, const GridFn& integrator) {
  if (!(integrand.grid() == integrator.grid())) throw std::invalid_argument("Stieltjes sum needs a common grid");
  std::vector<double> out(integrand.size(), 0.0);
  for (std::size_t j = 0; j + 1 < out.size(); ++j) {
    out[j + 1] = out[j] + integrand[j] * (integrator[j + 1] - integrator[j]);
  }
  return GridFn(integrand.grid(), std::move(out));
}

GridFn stieltjes_trapezoid(const GridFn& integrand, const GridFn& integrator) {
  if (!(integrand.grid() == integrator.grid())) throw std::invalid_argument("Stieltjes sum needs a common grid");
  std::vector<double> out(integrand.size(), 0.0);
  for (std::size_t j = 0; j + 1 < out.size(); ++j) {
    out[j + 1] = out[j] + 0.5 * (integrand[j] + integrand[j + 1]) * (integrator[j + 1] - integrator[j]);
  }
  return GridFn(integrand.grid(), std::move(out));
}

GridFn young_integral(const GridFn& sigma, const FbmPath& path) { return stieltjes_left(sigma, path.fbm); }

IsometryCheck isometry_residual(const GridFn& f, const GridFn& g, const HurstSpec& H, std::size_t n_mc,
                                std::uint64_t seed) {
  if (!(f.grid() == g.grid())) throw std::invalid_argument("isometry check needs a common grid");
  if (n_mc < 2) throw std::invalid_argument("isometry check needs at least two paths");
  const TimeGrid& grid = f.grid();
  const FbmSampler sampler(H, grid, SampleMethod::cholesky);
  std::vector<double> w(grid.size()), b(grid.size());
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n_mc; ++k) {
    RandomStream rng(seed, k);
    sampler.draw(rng, w, b);
    double x = 0.0, y = 0.0;
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
      const double db = b[j + 1] - b[j];
      x += f[j] * db;
      y += g[j] * db;
    }
    const double v = x * y;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(n_mc - 1);
  return {mean, isometry_exact(f, g, H), std::sqrt(var / static_cast<double>(n_mc))};
}

}  // namespace omf
