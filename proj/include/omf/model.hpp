#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "omf/grid.hpp"

namespace omf {

/// V and its first three derivatives.
struct Potential {
  std::function<double(double)> V, dV, d2V, d3V;

  /// V(x) = sum_k c[k] x^k.
  static Potential polynomial(std::vector<double> coeffs);
  /// The double well V(x) = (x^4 - 2x^2) / 4.
  static Potential double_well();
};

using ForceFn = std::function<double(double t, double x, double y)>;

/// Drift f_t(x, y) of the velocity equation and the partial derivatives the
/// functional and its Euler-Lagrange equation need.
struct Force {
  std::string name;
  ForceFn f, fx, fy, fxy, fyy;
  double lipschitz = std::numeric_limits<double>::infinity();
  double bound = std::numeric_limits<double>::infinity();
  /// Set when f = -damping * y - V'(x).
  std::optional<Potential> potential;
  double damping = 0.0;

  bool fy_constant = false;

  static Force zero();
  static Force pendulum(double k, double gamma);
  /// f = -gamma y - V'(x) + amplitude cos(omega t); autonomous when amplitude = 0.
  static Force potential_force(const std::string& name, Potential V, double gamma, double amplitude = 0.0,
                               double omega = 0.0);
  static Force harmonic(double omega2);
  /// State-independent drift g(t).
  static Force time_only(std::function<double(double)> g);
};

/// Deterministic noise intensity with known bounds m <= sigma <= M.
struct Sigma {
  std::string name;
  std::function<double(double)> value;
  double lower = 0.0;
  double upper = 0.0;
  double holder_gamma = 1.0;

  static Sigma constant(double c);
  /// sigma0 + amplitude cos(omega t).
  static Sigma cosine(double sigma0, double amplitude, double omega);
  /// sigma0 + amplitude sin(omega t).
  static Sigma sine(double sigma0, double amplitude, double omega);

  GridFn on(const TimeGrid& grid) const { return GridFn::from(grid, value); }
};

struct ModelSpec {
  Sigma sigma;
  Force force;
};

/// k with the undamped pendulum x'' = -k sin x travelling from (-pi/2, 0) to (pi/2, 0) in unit time.
double pendulum_k();

}  // namespace omf
