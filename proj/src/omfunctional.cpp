#include "omf/omfunctional.hpp"

#include <algorithm>
#include <cmath>

namespace omf {

namespace {

bool matches(double a, double b) { return std::abs(a - b) <= 1e-10 * (1.0 + std::abs(b)); }

GridFn force_on_path(const PathPair& path, const ForceFn& f) {
  const TimeGrid& grid = path.grid();
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = f(grid.node(i), path.psi()[i], path.phi()[i]);
    if (!std::isfinite(v[i])) throw NumericalFailure("force is not finite along the path", i);
  }
  return GridFn(grid, std::move(v));
}

}  // namespace

// ---------------------------------------------------------------- PathPair

PathPair::PathPair(GridFn psi, GridFn phi, BoundaryData boundary)
    : psi_(std::move(psi)), phi_(std::move(phi)), boundary_(boundary), cache_(std::make_shared<Cache>()) {
  if (!(psi_.grid() == phi_.grid())) throw std::invalid_argument("psi and phi live on different grids");
  if (!matches(psi_.front(), boundary_.x0)) throw std::invalid_argument("psi(0) does not match x0");
  if (!matches(phi_.front(), boundary_.y0)) throw std::invalid_argument("phi(0) does not match y0");
}

PathPair PathPair::from_velocity(const GridFn& phi, double x0, std::optional<BoundaryData> boundary) {
  GridFn psi = cumulative_integral(phi);
  for (double& v : psi.values()) v += x0;
  const BoundaryData b = boundary.value_or(BoundaryData{x0, phi.front(), psi.back(), phi.back()});
  return PathPair(std::move(psi), phi, b);
}

double PathPair::consistency_error() const {
  const GridFn integral = cumulative_integral(phi_);
  double e = 0.0;
  for (std::size_t i = 0; i < psi_.size(); ++i) e = std::max(e, std::abs(psi_[i] - boundary_.x0 - integral[i]));
  return e;
}

CellFn PathPair::phi_dot(const GridFn& sigma, const HurstSpec& H) const {
  std::lock_guard lock(cache_->mutex);
  const auto s = sigma.values();
  if (cache_->value && cache_->H == H.H() && std::equal(s.begin(), s.end(), cache_->sigma.begin(), cache_->sigma.end())) {
    return *cache_->value;
  }
  CellFn v = velocity_dot(phi_, boundary_.y0, sigma, H);
  if (!cache_->value) {
    cache_->value = v;
    cache_->H = H.H();
    cache_->sigma.assign(s.begin(), s.end());
  }
  return v;
}

// ---------------------------------------------------------------- functional

double d_H(double H) {
  if (!(H > 0.25 && H < 1.0)) throw std::invalid_argument("Hurst index must lie in (1/4, 1)");
  return std::sqrt(2.0 * H * std::tgamma(0.5 + H) * std::tgamma(1.5 - H) / std::tgamma(2.0 - 2.0 * H));
}

double d_H(const HurstSpec& H) { return d_H(H.H()); }

CellFn om_mismatch(const PathPair& path, const ModelSpec& model, const HurstSpec& H, OMForm form) {
  const TimeGrid& grid = path.grid();
  const GridFn sigma = model.sigma.on(grid);
  const GridFn f = force_on_path(path, model.force.f);

  if (form == OMForm::unified) {
    GridFn g = path.phi() - cumulative_integral(f);
    for (double& v : g.values()) v -= path.boundary().y0;
    return apply_KH_sigma_inverse(g, sigma, H);
  }

  const CellFn s = cell_average(sigma);
  CellFn drift = cell_average(f);
  for (std::size_t j = 0; j < drift.size(); ++j) drift[j] /= s[j];
  return path.phi_dot(sigma, H) - kh_inverse_slopes(drift, H);
}

OMValue om_functional(const PathPair& path, const ModelSpec& model, const HurstSpec& H, OMForm form) {
  const CellFn m = om_mismatch(path, model, H, form);
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (!std::isfinite(m[j])) throw NumericalFailure("OM integrand is not finite", j);
  }
  const GridFn fy = force_on_path(path, model.force.fy);

  OMValue out;
  out.mismatch_term = -0.5 * integrate(m * m);
  out.divergence_term = -0.5 * d_H(H) * integrate(fy);
  out.J = out.mismatch_term + out.divergence_term;
  out.regime = H.regime();
  out.H = H.H();
  out.n = path.grid().size();
  out.form = form;
  return out;
}

DuffingReduction duffing_reduced_functional(const PathPair& path, double gamma, const Potential& V) {
  const TimeGrid& grid = path.grid();
  if (grid.size() < 5) throw std::invalid_argument("the reduced functional needs at least five nodes");
  const GridFn& psi = path.psi();
  const GridFn& phi = path.phi();
  const double dt = grid.step();

  DuffingReduction r;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double acc = (phi[j + 1] - phi[j]) / dt;
    const double vel = 0.5 * (phi[j] + phi[j + 1]);
    const double dpsi = psi[j + 1] - psi[j];
    const double force = std::abs(dpsi) > 1e-9 * (1.0 + std::abs(psi[j])) ? (V.V(psi[j + 1]) - V.V(psi[j])) / dpsi
                                                                          : V.dV(0.5 * (psi[j] + psi[j + 1]));
    const double a = acc + force;
    r.reduced += dt * (a * a + gamma * gamma * vel * vel);
    const double b = a + gamma * vel;
    r.full += dt * b * b;
  }
  const std::size_t e = grid.size() - 1;
  r.boundary_correction = gamma * (phi[e] * phi[e] - phi[0] * phi[0] + 2.0 * (V.V(psi[e]) - V.V(psi[0])));
  return r;
}

// ---------------------------------------------------------------- regularity check

double assumption_ratio(double m, double M, double L, double alpha, double beta) {
  const double g1 = std::tgamma(1.0 + beta);
  const double g2 = std::tgamma(beta - alpha);
  return m * m * (2.0 * beta + 1.0) * g1 * g1 / (2.0 * M * M * alpha * alpha * L * L * g2 * g2);
}

double default_beta(const HurstSpec& H) {
  const double lo = std::max(0.0, H.H() - 0.5);
  const double hi = H.H() - 0.25;
  return 0.5 * (lo + hi);
}

AssumptionReport check_assumption_A(const ModelSpec& model, const HurstSpec& H, double beta) {
  AssumptionReport r;
  r.m = model.sigma.lower;
  r.M = model.sigma.upper;
  r.L = model.force.lipschitz;
  r.force_bounded = std::isfinite(model.force.bound);

  bool ok = true;
  if (!(r.m > 0.0)) {
    ok = false;
    r.reasons.emplace_back("noise intensity not bounded below");
  }
  if (!std::isfinite(r.M) || r.M < r.m) {
    ok = false;
    r.reasons.emplace_back("noise intensity not bounded above");
  }
  if (ok) {
    const GridFn s = model.sigma.on(make_grid(4097));
    for (double v : s.values()) {
      if (v < r.m * (1.0 - 1e-12) || v > r.M * (1.0 + 1e-12)) {
        ok = false;
        r.reasons.emplace_back("noise intensity leaves its declared bounds");
        break;
      }
    }
  }

  const double lo = std::max(0.0, H.H() - 0.5);
  const double hi = H.regime() == Regime::standard ? 0.5 : H.H() - 0.25;
  r.beta_in_window = beta > lo && beta < hi;

  if (H.regime() == Regime::regular) {
    r.inequality_applicable = true;
    if (!(beta > H.alpha())) {
      ok = false;
      r.reasons.emplace_back("beta must exceed H - 1/2");
    } else if (!std::isfinite(r.L)) {
      ok = false;
      r.reasons.emplace_back("force is not globally Lipschitz");
    } else if (r.m > 0.0) {
      r.ratio = assumption_ratio(r.m, r.M, r.L, H.alpha(), beta);
      if (!(r.ratio > 1.0)) {
        ok = false;
        r.reasons.emplace_back("Lipschitz-noise inequality fails");
      }
    }
  }
  r.pass = ok;
  return r;
}

}  // namespace omf
