#include "omf/mpp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "omf/fraccalc.hpp"
#include "omf/rng.hpp"

namespace omf {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double inf = std::numeric_limits<double>::infinity();

// Dense matrix of kh_inverse_slopes on the grid's cells; null in the standard case.
std::shared_ptr<const MatrixXd> inverse_matrix(const HurstSpec& H, const TimeGrid& grid) {
  if (H.regime() == Regime::standard) return nullptr;
  static std::mutex mutex;
  static std::map<std::pair<double, std::size_t>, std::shared_ptr<const MatrixXd>> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_pair(H.H(), grid.size());
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const std::size_t c = grid.cells();
  auto W = std::make_shared<MatrixXd>(c, c);
  CellFn e(grid, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    e[k] = 1.0;
    const CellFn col = kh_inverse_slopes(e, H);
    for (std::size_t j = 0; j < c; ++j) (*W)(j, k) = col[j];
    e[k] = 0.0;
  }
  cache.emplace(key, W);
  return W;
}

// -J as a function of the cell accelerations a, with phi = y0 + cumulate(a)
// and psi = x0 + trapezoid integral of phi.
class Objective {
 public:
  Objective(const ModelSpec& model, const HurstSpec& H, const TimeGrid& grid, double x0, double y0)
      : model_(model), H_(H), grid_(grid), x0_(x0), y0_(y0), dt_(grid.step()), dH_(d_H(H)),
        W_(inverse_matrix(H, grid)) {
    const CellFn s = cell_average(model.sigma.on(grid));
    sbar_.resize(static_cast<Eigen::Index>(s.size()));
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] == 0.0) throw std::invalid_argument("noise intensity vanishes on a cell");
      sbar_(static_cast<Eigen::Index>(j)) = s[j];
    }
  }

  std::size_t cells() const { return grid_.cells(); }

  void nodes(const VectorXd& a, std::vector<double>& phi, std::vector<double>& psi) const {
    const std::size_t n = grid_.size();
    phi.assign(n, y0_);
    psi.assign(n, x0_);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      phi[i + 1] = phi[i] + dt_ * a(static_cast<Eigen::Index>(i));
      psi[i + 1] = psi[i] + 0.5 * dt_ * (phi[i] + phi[i + 1]);
    }
  }

  PathPair path(const VectorXd& a, const BoundaryData& b) const {
    std::vector<double> phi, psi;
    nodes(a, phi, psi);
    return PathPair(GridFn(grid_, std::move(psi)), GridFn(grid_, std::move(phi)), b);
  }

  double value(const VectorXd& a, VectorXd* grad) const {
    const std::size_t n = grid_.size();
    const auto c = static_cast<Eigen::Index>(grid_.cells());
    std::vector<double> phi, psi;
    nodes(a, phi, psi);
    std::vector<double> f(n), fy(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = grid_.node(i);
      f[i] = model_.force.f(t, psi[i], phi[i]);
      fy[i] = model_.force.fy(t, psi[i], phi[i]);
    }
    VectorXd v(c);
    for (Eigen::Index j = 0; j < c; ++j) {
      const auto u = static_cast<std::size_t>(j);
      v(j) = (a(j) - 0.5 * (f[u] + f[u + 1])) / sbar_(j);
    }
    const VectorXd m = W_ ? VectorXd(*W_ * v) : v;
    double trap = 0.0;
    for (std::size_t i = 0; i < n; ++i) trap += (i == 0 || i + 1 == n ? 0.5 : 1.0) * fy[i];
    const double obj = 0.5 * dt_ * m.squaredNorm() + 0.5 * dH_ * dt_ * trap;
    if (!std::isfinite(obj)) return inf;
    if (!grad) return obj;

    VectorXd q = W_ ? VectorXd(W_->transpose() * m) : m;
    q.array() /= sbar_.array();
    std::vector<double> A(n), B(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = grid_.node(i);
      const double w = 0.5 * ((i > 0 ? q(static_cast<Eigen::Index>(i - 1)) : 0.0) +
                              (i + 1 < n ? q(static_cast<Eigen::Index>(i)) : 0.0));
      const double ci = (i == 0 || i + 1 == n ? 0.5 : 1.0);
      const double fx = model_.force.fx(t, psi[i], phi[i]);
      A[i] = -dt_ * w * fx + 0.5 * dH_ * dt_ * ci * model_.force.fxy(t, psi[i], phi[i]);
      B[i] = -dt_ * w * fy[i] + 0.5 * dH_ * dt_ * ci * model_.force.fyy(t, psi[i], phi[i]);
    }
    grad->resize(c);
    double sa0 = 0.0, sa1 = 0.0, sb = 0.0;
    for (Eigen::Index k = c - 1; k >= 0; --k) {
      const auto i = static_cast<std::size_t>(k) + 1;
      sa0 += A[i];
      sa1 += static_cast<double>(i) * A[i];
      sb += B[i];
      (*grad)(k) = dt_ * q(k) + dt_ * dt_ * (sa1 - (static_cast<double>(k) + 0.5) * sa0) + dt_ * sb;
    }
    return obj;
  }

  VectorXd fd_gradient(const VectorXd& a) const {
    VectorXd g(a.size());
    VectorXd x = a;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      const double h = 1e-6 * (1.0 + std::abs(a(k)));
      x(k) = a(k) + h;
      const double up = value(x, nullptr);
      x(k) = a(k) - h;
      const double dn = value(x, nullptr);
      x(k) = a(k);
      g(k) = (up - dn) / (2.0 * h);
    }
    return g;
  }

  // dt * Jm^T Jm with Jm the Jacobian of the mismatch in a.
  MatrixXd gauss_newton(const VectorXd& a) const {
    const std::size_t n = grid_.size();
    const auto c = static_cast<Eigen::Index>(grid_.cells());
    std::vector<double> phi, psi;
    nodes(a, phi, psi);
    std::vector<double> fx(n), fy(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = grid_.node(i);
      fx[i] = model_.force.fx(t, psi[i], phi[i]);
      fy[i] = model_.force.fy(t, psi[i], phi[i]);
    }
    MatrixXd D = MatrixXd::Identity(c, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index k = 0; k < c; ++k) {
        double s = 0.0;
        for (Eigen::Index i = j; i <= j + 1; ++i) {
          if (i > k) {
            const auto u = static_cast<std::size_t>(i);
            s += fx[u] * dt_ * dt_ * (static_cast<double>(i - k) - 0.5) + fy[u] * dt_;
          }
        }
        D(j, k) -= 0.5 * s;
      }
      D.row(j) /= sbar_(j);
    }
    const MatrixXd Jm = W_ ? MatrixXd(*W_ * D) : D;
    return dt_ * Jm.transpose() * Jm;
  }

 private:
  const ModelSpec& model_;
  HurstSpec H_;
  TimeGrid grid_;
  double x0_, y0_, dt_, dH_;
  std::shared_ptr<const MatrixXd> W_;
  VectorXd sbar_;
};

struct StartResult {
  VectorXd a;
  double objective = inf;
  std::size_t iterations = 0;
  double grad_norm = inf;
  bool converged = false;
};

VectorXd slopes_of(const GridFn& phi) {
  const CellFn s = cell_slope(phi);
  VectorXd a(static_cast<Eigen::Index>(s.size()));
  for (std::size_t j = 0; j < s.size(); ++j) a(static_cast<Eigen::Index>(j)) = s[j];
  return a;
}

class ConstrainedBfgs {
 public:
  ConstrainedBfgs(const Objective& obj, const MppProblem& p) : obj_(obj), p_(p) {
    const std::size_t n = p.grid.size();
    const auto c = static_cast<Eigen::Index>(p.grid.cells());
    const double dt = p.grid.step();
    const auto& b = p.boundary;
    MatrixXd C(2, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      C(0, j) = dt;
      C(1, j) = dt * dt * (static_cast<double>(n) - 1.5 - static_cast<double>(j));
    }
    Eigen::Vector2d d(b.y1 - b.y0, b.x1 - b.x0 - b.y0 * dt * static_cast<double>(n - 1));
    a_p_ = C.transpose() * (C * C.transpose()).ldlt().solve(d);
    Eigen::HouseholderQR<MatrixXd> qr(C.transpose());
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(c, c);
    N_ = Q.rightCols(c - 2);
  }

  StartResult run(const VectorXd& a_init) const {
    StartResult r;
    VectorXd z = N_.transpose() * (a_init - a_p_);
    VectorXd a = a_p_ + N_ * z;
    VectorXd g;
    double f = evaluate(a, g);
    if (!std::isfinite(f)) throw std::invalid_argument("OM objective is not finite at the initial path");
    VectorXd gz = N_.transpose() * g;

    const auto dim = z.size();
    MatrixXd G = N_.transpose() * obj_.gauss_newton(a) * N_;
    const double ridge = 1e-12 * std::max(G.trace() / static_cast<double>(dim), 1e-300);
    G.diagonal().array() += ridge;
    Eigen::LDLT<MatrixXd> ldlt(G);
    MatrixXd H0 = ldlt.info() == Eigen::Success ? MatrixXd(ldlt.solve(MatrixXd::Identity(dim, dim)))
                                                : MatrixXd(MatrixXd::Identity(dim, dim));
    MatrixXd Hinv = H0;

    for (r.iterations = 0;; ++r.iterations) {
      r.grad_norm = gz.norm();
      if (r.grad_norm <= p_.tolerance * (1.0 + std::abs(f))) {
        r.converged = true;
        break;
      }
      if (r.iterations >= p_.max_iter) break;
      VectorXd dir = -Hinv * gz;
      double slope = gz.dot(dir);
      if (!(slope < 0.0)) {
        Hinv = H0;
        dir = -Hinv * gz;
        slope = gz.dot(dir);
        if (!(slope < 0.0)) {
          dir = -gz;
          slope = -gz.squaredNorm();
        }
      }
      double t = 1.0;
      bool accepted = false;
      VectorXd z_new, a_new, g_new;
      double f_new = inf;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        z_new = z + t * dir;
        a_new = a_p_ + N_ * z_new;
        f_new = evaluate(a_new, g_new);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const VectorXd gz_new = N_.transpose() * g_new;
      const VectorXd s = z_new - z;
      const VectorXd y = gz_new - gz;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        const double rho = 1.0 / sy;
        const VectorXd Hy = Hinv * y;
        Hinv += (rho * rho * (sy + y.dot(Hy))) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
      }
      z = z_new;
      a = a_new;
      f = f_new;
      gz = gz_new;
    }
    r.a = a;
    r.objective = f;
    return r;
  }

  VectorXd project(const VectorXd& a) const { return a_p_ + N_ * (N_.transpose() * (a - a_p_)); }

 private:
  double evaluate(const VectorXd& a, VectorXd& g) const {
    if (p_.gradient == GradientMode::analytic) return obj_.value(a, &g);
    const double f = obj_.value(a, nullptr);
    if (std::isfinite(f)) g = obj_.fd_gradient(a);
    return f;
  }

  const Objective& obj_;
  const MppProblem& p_;
  VectorXd a_p_;
  MatrixXd N_;
};

std::vector<VectorXd> initial_accelerations(const MppProblem& p) {
  const auto c = static_cast<Eigen::Index>(p.grid.cells());
  const auto& b = p.boundary;
  if (p.init_path) {
    if (!(p.init_path->grid() == p.grid)) throw std::invalid_argument("initial path lives on another grid");
    return {slopes_of(p.init_path->phi())};
  }
  const VectorXd linear = VectorXd::Constant(c, b.y1 - b.y0);
  auto shoot = [&]() -> VectorXd {
    try {
      return slopes_of(noiseless_shoot(p.model, b.x0, b.y0, p.grid).phi());
    } catch (const NumericalFailure&) {
      return linear;
    }
  };
  switch (p.init) {
    case InitKind::linear: return {linear};
    case InitKind::noiseless_shoot: return {shoot()};
    case InitKind::multistart: break;
  }
  std::vector<VectorXd> starts{shoot(), linear};
  const double scale = 1.0 + std::abs(b.y1 - b.y0) + std::abs(b.x1 - b.x0);
  for (std::size_t s = 2; s < p.starts; ++s) {
    RandomStream rng(p.seed, s);
    VectorXd a = linear;
    for (int mode = 1; mode <= 3; ++mode) {
      const double amp = scale * rng.normal();
      for (Eigen::Index j = 0; j < c; ++j) {
        a(j) += amp * std::sin(mode * std::numbers::pi * p.grid.midpoint(static_cast<std::size_t>(j)));
      }
    }
    starts.push_back(a);
  }
  starts.resize(std::min<std::size_t>(starts.size(), std::max<std::size_t>(p.starts, 1)));
  return starts;
}

}  // namespace

// ---------------------------------------------------------------- minimize_om

OMGradient om_objective(const PathPair& path, const ModelSpec& model, const HurstSpec& H, GradientMode mode) {
  const Objective obj(model, H, path.grid(), path.boundary().x0, path.boundary().y0);
  const VectorXd a = slopes_of(path.phi());
  OMGradient out;
  VectorXd g;
  out.value = obj.value(a, &g);
  if (mode == GradientMode::finite_difference) g = obj.fd_gradient(a);
  out.gradient.assign(g.data(), g.data() + g.size());
  return out;
}

MppSolution minimize_om(const MppProblem& p) {
  if (p.grid.size() < 33) throw std::invalid_argument("minimize_om needs at least 33 grid nodes");
  const auto& b = p.boundary;
  for (double v : {b.x0, b.y0, b.x1, b.y1}) {
    if (!std::isfinite(v)) throw std::invalid_argument("boundary data must be finite");
  }
  const Objective obj(p.model, p.H, p.grid, b.x0, b.y0);
  const ConstrainedBfgs solver(obj, p);
  const std::vector<VectorXd> starts = initial_accelerations(p);
  for (const VectorXd& a : starts) {
    if (!std::isfinite(obj.value(solver.project(a), nullptr))) {
      throw std::invalid_argument("OM objective is not finite at the initial path");
    }
  }

  std::vector<StartResult> results(starts.size());
  std::vector<std::exception_ptr> errors(starts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t s; (s = next++) < starts.size();) {
      try {
        results[s] = solver.run(starts[s]);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(p.threads, 1, starts.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t best = 0;
  for (std::size_t s = 1; s < results.size(); ++s) {
    if (results[s].objective < results[best].objective - 1e-10) best = s;
  }
  const StartResult& r = results[best];
  PathPair path = obj.path(r.a, b);
  MppSolution sol{path, om_functional(path, p.model, p.H), r.iterations, r.grad_norm, r.converged,
                  starts.size(), best, 0.0, p.seed, std::nullopt};
  sol.boundary_residual = std::max(std::abs(path.psi().back() - b.x1), std::abs(path.phi().back() - b.y1));
  return sol;
}

// ---------------------------------------------------------------- el_residual

GridFn el_residual(const PathPair& path, const ModelSpec& model, const HurstSpec& H, ELVariant variant) {
  const TimeGrid& grid = path.grid();
  const std::size_t n = grid.size();
  if (n < 7) throw std::invalid_argument("el_residual needs at least seven nodes");
  const double dt = grid.step();
  const double a = H.alpha();
  const CellFn m = om_mismatch(path, model, H, OMForm::regime_specific);
  const CellFn sbar = cell_average(model.sigma.on(grid));

  auto adjoint_image = [&](double pre, double post) {
    switch (H.regime()) {
      case Regime::standard: return m;
      case Regime::singular: return weighted_cell_op(m, a, Orientation::right, OpKind::integral, pre, post);
      case Regime::regular: return weighted_cell_op(m, a, Orientation::right, OpKind::derivative, pre, post);
    }
    return m;
  };
  // Cell data to interior nodes by averaging the two neighbouring cells.
  auto to_nodes = [&](const CellFn& c, double scale) {
    std::vector<double> u(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) u[i] = scale * 0.5 * (c[i - 1] / sbar[i - 1] + c[i] / sbar[i]);
    return u;
  };

  std::vector<double> u1, u3;
  double c2 = 2.0, cx = 2.0, cy = 2.0, cd = d_H(H);
  const double pre = H.regime() == Regime::singular ? a : -a;
  if (variant == ELVariant::adjoint) {
    u1 = to_nodes(adjoint_image(pre, -pre), 1.0 / kh_constant(H));
    u3 = u1;
  } else if (H.regime() == Regime::standard) {
    u1 = to_nodes(m, 2.0);
    u3 = u1;
    c2 = cx = cy = cd = 1.0;
  } else {
    u1 = to_nodes(adjoint_image(pre, -pre), 1.0);
    u3 = H.regime() == Regime::regular ? to_nodes(adjoint_image(a, a), 1.0) : u1;
    cx = cy = 1.0;
  }

  std::vector<double> fx(n), fy(n), fxy(n), fyy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = grid.node(i), x = path.psi()[i], y = path.phi()[i];
    fx[i] = model.force.fx(t, x, y);
    fy[i] = model.force.fy(t, x, y);
    fxy[i] = model.force.fxy(t, x, y);
    fyy[i] = model.force.fyy(t, x, y);
  }
  const bool printed_standard = variant == ELVariant::printed && H.regime() == Regime::standard;

  std::vector<double> r(n, 0.0);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double d2 = (u1[i + 1] - 2.0 * u1[i] + u1[i - 1]) / (dt * dt);
    // The printed standard display differentiates the product with f_x.
    const std::vector<double>& g = printed_standard ? fx : fy;
    const double d1 = (g[i + 1] * u3[i + 1] - g[i - 1] * u3[i - 1]) / (2.0 * dt);
    const double dyy = (fyy[i + 1] - fyy[i - 1]) / (2.0 * dt);
    r[i] = c2 * d2 - cx * fx[i] * u1[i] + cy * d1 +
           (printed_standard ? fxy[i] + fyy[i] : cd * (fxy[i] - dyy));
    if (!std::isfinite(r[i])) throw NumericalFailure("Euler-Lagrange residual is not finite", i);
  }
  return GridFn(grid, std::move(r));
}

// ---------------------------------------------------------------- noiseless_shoot

PathPair noiseless_shoot(const ModelSpec& model, double x0, double y0, const TimeGrid& grid) {
  const std::size_t n = grid.size();
  const double h = grid.step();
  const auto& f = model.force.f;
  std::vector<double> x(n), y(n);
  x[0] = x0;
  y[0] = y0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double t = grid.node(i);
    const double k1x = y[i], k1y = f(t, x[i], y[i]);
    const double k2x = y[i] + 0.5 * h * k1y, k2y = f(t + 0.5 * h, x[i] + 0.5 * h * k1x, y[i] + 0.5 * h * k1y);
    const double k3x = y[i] + 0.5 * h * k2y, k3y = f(t + 0.5 * h, x[i] + 0.5 * h * k2x, y[i] + 0.5 * h * k2y);
    const double k4x = y[i] + h * k3y, k4y = f(t + h, x[i] + h * k3x, y[i] + h * k3y);
    x[i + 1] = x[i] + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    y[i + 1] = y[i] + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    if (!std::isfinite(x[i + 1]) || !std::isfinite(y[i + 1])) {
      throw NumericalFailure("noiseless trajectory is not finite", i + 1);
    }
  }
  const BoundaryData b{x0, y0, x.back(), y.back()};
  return PathPair(GridFn(grid, std::move(x)), GridFn(grid, std::move(y)), b);
}

// ---------------------------------------------------------------- solve_el_bvp

MppSolution solve_el_bvp(const Potential& V, double gamma, const BoundaryData& b, const TimeGrid& grid,
                         std::optional<PathPair> init, double sigma) {
  const std::size_t n = grid.size();
  if (n < 5) throw std::invalid_argument("solve_el_bvp needs at least five nodes");
  const double dt = grid.step();
  const auto m = static_cast<Eigen::Index>(n + 2);  // psi_{-1} .. psi_n

  VectorXd u(m);
  if (init) {
    if (!(init->grid() == grid)) throw std::invalid_argument("initial path lives on another grid");
    for (std::size_t i = 0; i < n; ++i) u(static_cast<Eigen::Index>(i + 1)) = init->psi()[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = grid.node(i);
      const double h00 = 2 * t * t * t - 3 * t * t + 1, h10 = t * t * t - 2 * t * t + t;
      const double h01 = -2 * t * t * t + 3 * t * t, h11 = t * t * t - t * t;
      u(static_cast<Eigen::Index>(i + 1)) = h00 * b.x0 + h10 * b.y0 + h01 * b.x1 + h11 * b.y1;
    }
  }
  u(0) = u(2) - 2.0 * dt * b.y0;
  u(m - 1) = u(m - 3) + 2.0 * dt * b.y1;

  const double dt2 = dt * dt, dt4 = dt2 * dt2;
  const double g2 = gamma * gamma;
  auto d4V = [&](double x) {
    const double h = 1e-5 * (1.0 + std::abs(x));
    return (V.d3V(x + h) - V.d3V(x - h)) / (2.0 * h);
  };
  // Interior rows are scaled by dt^4.
  auto residual = [&](const VectorXd& v) {
    VectorXd F(m);
    F(0) = v(1) - b.x0;
    F(1) = (v(2) - v(0)) / (2.0 * dt) - b.y0;
    for (Eigen::Index i = 1; i + 1 < static_cast<Eigen::Index>(n); ++i) {
      const Eigen::Index k = i + 1;
      const double x = v(k);
      const double d4 = v(k - 2) - 4 * v(k - 1) + 6 * x - 4 * v(k + 1) + v(k + 2);
      const double d2 = v(k - 1) - 2 * x + v(k + 1);
      const double d1 = (v(k + 1) - v(k - 1)) / 2.0;
      F(i + 1) = d4 + (2 * V.d2V(x) - g2) * d2 * dt2 + V.d3V(x) * d1 * d1 * dt2 + V.d2V(x) * V.dV(x) * dt4;
    }
    F(m - 2) = v(m - 2) - b.x1;
    F(m - 1) = (v(m - 1) - v(m - 3)) / (2.0 * dt) - b.y1;
    return F;
  };
  auto jacobian = [&](const VectorXd& v) {
    std::vector<Eigen::Triplet<double>> T;
    T.reserve(static_cast<std::size_t>(m) * 5);
    T.emplace_back(0, 1, 1.0);
    T.emplace_back(1, 2, 1.0 / (2.0 * dt));
    T.emplace_back(1, 0, -1.0 / (2.0 * dt));
    for (Eigen::Index i = 1; i + 1 < static_cast<Eigen::Index>(n); ++i) {
      const Eigen::Index k = i + 1, row = i + 1;
      const double x = v(k);
      const double d2 = v(k - 1) - 2 * x + v(k + 1);
      const double d1 = (v(k + 1) - v(k - 1)) / 2.0;
      const double c2 = (2 * V.d2V(x) - g2) * dt2;
      const double c1 = V.d3V(x) * d1 * dt2;  // derivative of d1^2 term per unit d1
      const double diag = 6 - 2 * c2 + (2 * V.d3V(x) * d2 + d4V(x) * d1 * d1) * dt2 +
                          (V.d3V(x) * V.dV(x) + V.d2V(x) * V.d2V(x)) * dt4;
      T.emplace_back(row, k - 2, 1.0);
      T.emplace_back(row, k - 1, -4 + c2 - c1);
      T.emplace_back(row, k, diag);
      T.emplace_back(row, k + 1, -4 + c2 + c1);
      T.emplace_back(row, k + 2, 1.0);
    }
    T.emplace_back(m - 2, m - 2, 1.0);
    T.emplace_back(m - 1, m - 1, 1.0 / (2.0 * dt));
    T.emplace_back(m - 1, m - 3, -1.0 / (2.0 * dt));
    Eigen::SparseMatrix<double> Jac(m, m);
    Jac.setFromTriplets(T.begin(), T.end());
    return Jac;
  };

  VectorXd F = residual(u);
  double norm = F.lpNorm<Eigen::Infinity>();
  bool converged = false;
  std::size_t it = 0;
  for (; it < 100; ++it) {
    Eigen::SparseMatrix<double> Jac = jacobian(u);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(Jac);
    if (lu.info() != Eigen::Success) throw NumericalFailure("singular Euler-Lagrange Jacobian", it);
    const VectorXd step = lu.solve(-F);
    if (lu.info() != Eigen::Success || !step.allFinite()) {
      throw NumericalFailure("singular Euler-Lagrange Jacobian", it);
    }
    const double step_norm = step.lpNorm<Eigen::Infinity>();
    if (step_norm <= 1e-9 * (1.0 + u.lpNorm<Eigen::Infinity>())) {
      u += step;
      F = residual(u);
      norm = F.lpNorm<Eigen::Infinity>();
      converged = true;
      break;
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, lambda *= 0.5) {
      const VectorXd trial = u + lambda * step;
      const VectorXd Ft = residual(trial);
      const double nt = Ft.lpNorm<Eigen::Infinity>();
      if (std::isfinite(nt) && (nt <= (1.0 - 1e-4 * lambda) * norm || nt <= 1e-15)) {
        u = trial;
        F = Ft;
        norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  std::vector<double> psi(n), phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i + 1);
    psi[i] = u(k);
    phi[i] = (u(k + 1) - u(k - 1)) / (2.0 * dt);
  }
  psi[0] = b.x0;
  phi[0] = b.y0;
  PathPair path(GridFn(grid, std::move(psi)), GridFn(grid, std::move(phi)), b);
  const ModelSpec model{Sigma::constant(sigma), Force::potential_force("duffing", V, gamma)};
  MppSolution sol{path, om_functional(path, model, HurstSpec(0.5)), it, norm / dt4, converged, 1, 0, 0.0, 0,
                  duffing_reduced_functional(path, gamma, V)};
  sol.boundary_residual = std::max(std::abs(path.psi().back() - b.x1), std::abs(path.phi().back() - b.y1));
  return sol;
}

}  // namespace omf
