#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "omf/fbm.hpp"
#include "omf/grid.hpp"
#include "omf/model.hpp"

namespace omf {

struct BoundaryData {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// Candidate path: position psi, velocity phi = psi', and boundary data.
/// phi-dot is computed on first request and cached for the (sigma, H) pair.
class PathPair {
 public:
  PathPair(GridFn psi, GridFn phi, BoundaryData boundary);

  /// psi = x0 + running trapezoid integral of phi; y0 = phi(0).
  static PathPair from_velocity(const GridFn& phi, double x0, std::optional<BoundaryData> boundary = std::nullopt);

  const TimeGrid& grid() const noexcept { return psi_.grid(); }
  const GridFn& psi() const noexcept { return psi_; }
  const GridFn& phi() const noexcept { return phi_; }
  const BoundaryData& boundary() const noexcept { return boundary_; }

  /// max |psi - x0 - int phi|.
  double consistency_error() const;

  CellFn phi_dot(const GridFn& sigma, const HurstSpec& H) const;

 private:
  struct Cache {
    std::mutex mutex;
    std::optional<CellFn> value;
    double H = 0.0;
    std::vector<double> sigma;
  };

  GridFn psi_;
  GridFn phi_;
  BoundaryData boundary_;
  std::shared_ptr<Cache> cache_;
};

enum class OMForm { regime_specific, unified };

struct OMValue {
  double J = 0.0;
  double mismatch_term = 0.0;
  double divergence_term = 0.0;
  Regime regime = Regime::standard;
  double H = 0.5;
  std::size_t n = 0;
  OMForm form = OMForm::regime_specific;
};

/// sqrt(2H Gamma(1/2 + H) Gamma(3/2 - H) / Gamma(2 - 2H)).
double d_H(double H);
double d_H(const HurstSpec& H);

/// The per-cell mismatch (K_H^sigma)^{-1}(phi - y0 - int f) evaluated either
/// as phi-dot minus the drift image or through the combined inverse.
CellFn om_mismatch(const PathPair& path, const ModelSpec& model, const HurstSpec& H, OMForm form);

OMValue om_functional(const PathPair& path, const ModelSpec& model, const HurstSpec& H,
                      OMForm form = OMForm::regime_specific);

struct DuffingReduction {
  double reduced = 0.0;              // int (psi'' + V')^2 + gamma^2 psi'^2
  double full = 0.0;                 // int (psi'' + gamma psi' + V')^2
  double boundary_correction = 0.0;  // gamma (phi^2 + 2V(psi)) evaluated between the endpoints
};

/// Cellwise evaluation with psi'' as the velocity slope and V' as the secant
/// slope of V, so the cross term telescopes exactly on paths built by
/// PathPair::from_velocity.
DuffingReduction duffing_reduced_functional(const PathPair& path, double gamma, const Potential& V);

struct AssumptionReport {
  bool pass = false;
  bool inequality_applicable = false;
  double ratio = 0.0;  // left side of the Lipschitz-noise inequality, when applicable
  bool beta_in_window = false;
  bool force_bounded = false;
  double m = 0.0, M = 0.0, L = 0.0;
  std::vector<std::string> reasons;
};

/// Checks the noise bounds, the Lipschitz-noise inequality for H > 1/2 and
/// reports whether beta lies in the admissible norm window.
AssumptionReport check_assumption_A(const ModelSpec& model, const HurstSpec& H, double beta);

/// m^2 (2b + 1) Gamma(1 + b)^2 / (2 M^2 a^2 L^2 Gamma(b - a)^2).
double assumption_ratio(double m, double M, double L, double alpha, double beta);

/// Midpoint of the admissible norm window (max(0, H - 1/2), H - 1/4).
double default_beta(const HurstSpec& H);

}  // namespace omf
