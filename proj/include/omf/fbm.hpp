#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "omf/grid.hpp"
#include "omf/rng.hpp"

namespace omf {

enum class Regime { singular, standard, regular };

std::string to_string(Regime r);

/// Hurst index H in (1/4, 1) together with alpha = |H - 1/2|.
class HurstSpec {
 public:
  explicit HurstSpec(double H);

  double H() const noexcept { return H_; }
  double alpha() const noexcept { return alpha_; }
  Regime regime() const noexcept { return regime_; }

 private:
  double H_;
  double alpha_;
  Regime regime_;
};

/// R_H(t,s) = (|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2.
double covariance(double t, double s, const HurstSpec& H);

/// Normalising constants of the Volterra kernel (c_H for H > 1/2, b_H for H < 1/2).
double c_H(const HurstSpec& H);
double b_H(const HurstSpec& H);

/// Scalar relating the kernel operator to the bare fractional composition:
/// K_H = kh_constant * I^1 s^a I^a s^-a (H > 1/2), kh_constant * I^{1-2a} s^a I^a s^-a (H < 1/2).
/// Equals c_H Gamma(a), b_H Gamma(1 - a) and 1 respectively.
double kh_constant(const HurstSpec& H);

/// K_H(t,s) for 0 < s < t <= 1.
double kernel_KH(double t, double s, const HurstSpec& H);

// The K_H family acts on cell (piecewise-constant) data and returns node values,
// and its inverses act on node data and return cell values. Node-valued inputs
// are converted with cell averages.

GridFn apply_KH(const CellFn& h, const HurstSpec& H);
GridFn apply_KH(const GridFn& h, const HurstSpec& H);

/// K_H^{-1} applied to a function whose cell slopes are `d`.
CellFn kh_inverse_slopes(const CellFn& d, const HurstSpec& H);

/// K_H^{-1} h for h(0) = 0.
CellFn apply_KH_inverse(const GridFn& h, const HurstSpec& H);

/// (K_H^sigma f)(t) = int_0^t sigma d(K_H f); sigma is taken as its cell average.
GridFn apply_KH_sigma(const CellFn& f, const GridFn& sigma, const HurstSpec& H);
GridFn apply_KH_sigma(const GridFn& f, const GridFn& sigma, const HurstSpec& H);

/// (K_H^sigma)^{-1} g = K_H^{-1}(int_0^. sigma^{-1} dg) for g(0) = 0.
CellFn apply_KH_sigma_inverse(const GridFn& g, const GridFn& sigma, const HurstSpec& H);

/// phi-dot with phi - y0 = K_H^sigma(phi-dot).
CellFn velocity_dot(const GridFn& phi, double y0, const GridFn& sigma, const HurstSpec& H);

// ---------------------------------------------------------------- sampling

enum class SampleMethod { cholesky, kernel_synthesis };

std::string to_string(SampleMethod m);

struct FbmPath {
  TimeGrid grid;
  GridFn wiener;
  GridFn fbm;
  HurstSpec hurst;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  SampleMethod method = SampleMethod::cholesky;
};

/// Maps Wiener increments on a grid to fBm node values, B = M dW. The matrix
/// for a given (H, n, method) is built once and shared between samplers.
class FbmSampler {
 public:
  static constexpr std::size_t max_cholesky_nodes = 4097;

  FbmSampler(const HurstSpec& H, const TimeGrid& grid, SampleMethod method);

  const HurstSpec& hurst() const noexcept { return hurst_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  SampleMethod method() const noexcept { return method_; }

  /// Fills W and B^H on the grid nodes (both zero at t = 0).
  void draw(RandomStream& rng, std::span<double> wiener, std::span<double> fbm) const;
  FbmPath sample(std::uint64_t seed, std::uint64_t stream) const;

 private:
  HurstSpec hurst_;
  TimeGrid grid_;
  SampleMethod method_;
  std::shared_ptr<const Eigen::MatrixXd> map_;  // null when B^H = W
};

FbmPath sample_fbm(const HurstSpec& H, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream,
                   SampleMethod method);

/// Left-point Riemann-Stieltjes sums of `integrand` against `integrator`.
GridFn stieltjes_left(const GridFn& integrand, const GridFn& integrator);
/// Trapezoid Riemann-Stieltjes sums; preferred when the integrator is smooth.
GridFn stieltjes_trapezoid(const GridFn& integrand, const GridFn& integrator);

/// int_0^t sigma dB^H by left-point sums.
GridFn young_integral(const GridFn& sigma, const FbmPath& path);

struct IsometryCheck {
  double mc_estimate = 0.0;
  double analytic = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of E[int f dB^H int g dB^H] against its exact value.
/// For H > 1/2 the exact value is H(2H-1) int int f_t g_s |t-s|^{2H-2} by
/// cellwise-exact singular quadrature; otherwise the exact expectation of the
/// left-point sums is used.
IsometryCheck isometry_residual(const GridFn& f, const GridFn& g, const HurstSpec& H, std::size_t n_mc,
                                std::uint64_t seed);

}  // namespace omf
