#pragma once

#include <cstdint>
#include <optional>

#include "omf/fbm.hpp"
#include "omf/grid.hpp"
#include "omf/model.hpp"
#include "omf/omfunctional.hpp"

namespace omf {

enum class InitKind { linear, noiseless_shoot, multistart };

enum class GradientMode { analytic, finite_difference };

struct MppProblem {
  ModelSpec model;
  HurstSpec H{0.5};
  BoundaryData boundary;
  TimeGrid grid{129};
  InitKind init = InitKind::multistart;
  std::optional<PathPair> init_path;  // used as the only start when set
  std::size_t starts = 5;
  std::size_t max_iter = 500;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  GradientMode gradient = GradientMode::analytic;
};

struct MppSolution {
  PathPair path;
  OMValue J;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  std::size_t starts_tried = 0;
  std::size_t best_start = 0;
  double boundary_residual = 0.0;
  std::uint64_t seed = 0;
  std::optional<DuffingReduction> reduction;
};

/// Maximizes J over accelerations with the four boundary conditions imposed
/// as exact linear constraints. BFGS in the constraint null space, Armijo
/// backtracking.
MppSolution minimize_om(const MppProblem& problem);

/// -J and its gradient with respect to the cell accelerations of `path`
/// (phi slopes); exposed for gradient checks.
struct OMGradient {
  double value = 0.0;
  std::vector<double> gradient;
};
OMGradient om_objective(const PathPair& path, const ModelSpec& model, const HurstSpec& H, GradientMode mode);

enum class ELVariant { adjoint, printed };

/// Euler-Lagrange left-hand side at the interior nodes 2..n-3 (zero elsewhere).
/// `adjoint` is the variation of the discretized functional written with the
/// adjoint operators; `printed` is the closed form with unit coefficients and no kernel constant.
GridFn el_residual(const PathPair& path, const ModelSpec& model, const HurstSpec& H,
                   ELVariant variant = ELVariant::adjoint);

/// Classical RK4 for X'' = f_t(X, X') on the grid nodes.
PathPair noiseless_shoot(const ModelSpec& model, double x0, double y0, const TimeGrid& grid);

/// psi'''' + (2V'' - gamma^2) psi'' + V''' psi'^2 + V'' V' = 0 with clamped
/// position and velocity at both ends, by fourth differences with ghost nodes
/// and damped Newton. J is evaluated with constant noise intensity `sigma`.
MppSolution solve_el_bvp(const Potential& V, double gamma, const BoundaryData& boundary, const TimeGrid& grid,
                         std::optional<PathPair> init = std::nullopt, double sigma = 1.0);

}  // namespace omf
