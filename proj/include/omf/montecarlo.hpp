#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "omf/fbm.hpp"
#include "omf/grid.hpp"
#include "omf/model.hpp"
#include "omf/omfunctional.hpp"

namespace omf {

struct EnsembleSpec {
  ModelSpec model;
  HurstSpec H{0.5};
  double x0 = 0.0, y0 = 0.0;
  std::size_t n_steps = 256;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  /// Kernel synthesis is used automatically above the Cholesky size limit.
  SampleMethod method = SampleMethod::cholesky;
  std::size_t threads = 1;
  /// Number of leading paths whose trajectories are kept.
  std::size_t store_paths = 0;

  TimeGrid grid() const { return TimeGrid(n_steps + 1); }
};

struct StoredPath {
  std::size_t index = 0;
  GridFn x;
  GridFn y;
  GridFn fbm;
};

struct HitCount {
  std::size_t hits = 0;
  std::size_t trials = 0;
};

struct EnsembleResult {
  GridFn mean_x;
  GridFn mean_y;
  std::size_t n_paths = 0;
  std::size_t valid = 0;
  std::size_t diverged = 0;
  std::vector<StoredPath> paths;
  std::map<std::string, HitCount> hit_counts;
  std::uint64_t seed = 0;
  SampleMethod method = SampleMethod::cholesky;
};

/// Explicit Euler for dX = Y dt, dY = f dt + sigma dB^H with exact fBm
/// increments; path k uses the random stream (seed, k). Results do not depend
/// on the thread count.
EnsembleResult simulate_ensemble(const EnsembleSpec& spec);

enum class TubeMode { position_norm, noise_norm };

std::string to_string(TubeMode m);

struct TubeResult {
  double p_hat = 0.0;
  std::size_t hits = 0;
  std::size_t trials = 0;
  std::size_t diverged = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Wilson 95% interval for `hits` out of `trials`.
std::pair<double, double> wilson_interval(std::size_t hits, std::size_t trials);

/// Fraction of paths with [Y - phi]_beta <= epsilon (position norm) or
/// [int sigma dB^H]_beta <= epsilon (noise norm), on the simulation grid.
TubeResult tube_probability(const EnsembleSpec& spec, const PathPair& center, double epsilon, double beta,
                            TubeMode mode);

struct RatioResult {
  double log_ratio_mc = 0.0;
  double log_ratio_se = 0.0;
  double delta_J = 0.0;
  double relative_gap = 0.0;
  TubeResult tube1;
  TubeResult tube2;
  bool inconclusive = false;
};

/// log(P1 / P2) from common paths against J(psi1) - J(psi2).
RatioResult om_ratio_experiment(const EnsembleSpec& spec, const PathPair& psi1, const PathPair& psi2,
                                double epsilon, double beta);

struct SmallBallPoint {
  double epsilon = 0.0;
  double x = 0.0;  // epsilon^{-1/(H - beta)}
  double p_hat = 0.0;
  std::size_t hits = 0;
  bool used = false;
};

struct SmallBallResult {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<SmallBallPoint> points;
  std::size_t trials = 0;
};

/// Least-squares fit of log P(||int sigma dB^H||_beta <= eps) against
/// eps^{-1/(H - beta)}. Points with fewer than 10 hits are dropped.
SmallBallResult small_ball_diagnostic(const EnsembleSpec& spec, double beta, const std::vector<double>& eps_list);

}  // namespace omf
