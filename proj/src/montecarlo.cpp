#include "omf/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <thread>

namespace omf {

namespace {

constexpr std::size_t block_size = 256;

struct PathView {
  std::size_t index;
  std::span<const double> x, y, fbm, sigma;
  double dt;
  bool diverged;
};

void validate(const EnsembleSpec& spec) {
  if (spec.n_steps < 64) throw std::invalid_argument("ensemble needs at least 64 time steps");
  if (spec.n_paths < 1) throw std::invalid_argument("ensemble needs at least one path");
  if (!std::isfinite(spec.x0) || !std::isfinite(spec.y0)) throw std::invalid_argument("initial state must be finite");
}

SampleMethod effective_method(const EnsembleSpec& spec) {
  return spec.n_steps + 1 > FbmSampler::max_cholesky_nodes ? SampleMethod::kernel_synthesis : spec.method;
}

std::size_t block_count(const EnsembleSpec& spec) { return (spec.n_paths + block_size - 1) / block_size; }

// Simulates every path and hands it to visit(block, view). Each block is
// processed by exactly one thread, so per-block accumulators need no locking.
void for_each_path(const EnsembleSpec& spec, const std::function<void(std::size_t, const PathView&)>& visit) {
  validate(spec);
  const TimeGrid grid = spec.grid();
  const FbmSampler sampler(spec.H, grid, effective_method(spec));
  const GridFn sigma = spec.model.sigma.on(grid);
  const std::size_t n = grid.size();
  const double dt = grid.step();
  const std::size_t blocks = block_count(spec);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    std::vector<double> w(n), b(n), x(n), y(n);
    for (std::size_t blk; (blk = next++) < blocks;) {
      const std::size_t end = std::min(spec.n_paths, (blk + 1) * block_size);
      for (std::size_t k = blk * block_size; k < end; ++k) {
        RandomStream rng(spec.seed, k);
        sampler.draw(rng, w, b);
        x[0] = spec.x0;
        y[0] = spec.y0;
        bool diverged = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const double drift = spec.model.force.f(grid.node(i), x[i], y[i]);
          x[i + 1] = x[i] + y[i] * dt;
          y[i + 1] = y[i] + drift * dt + sigma[i] * (b[i + 1] - b[i]);
          if (!std::isfinite(x[i + 1]) || !std::isfinite(y[i + 1])) {
            diverged = true;
            break;
          }
        }
        visit(blk, PathView{k, x, y, b, sigma.values(), dt, diverged});
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(spec.threads, 1, std::max<std::size_t>(blocks, 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
}

void young_left(const PathView& p, std::vector<double>& out) {
  out.assign(p.fbm.size(), 0.0);
  for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i + 1] = out[i] + p.sigma[i] * (p.fbm[i + 1] - p.fbm[i]);
}

TubeResult make_tube(std::size_t hits, std::size_t trials, std::size_t diverged) {
  TubeResult r;
  r.hits = hits;
  r.trials = trials;
  r.diverged = diverged;
  r.p_hat = static_cast<double>(hits) / static_cast<double>(trials);
  std::tie(r.ci_low, r.ci_high) = wilson_interval(hits, trials);
  return r;
}

}  // namespace

std::string to_string(TubeMode m) { return m == TubeMode::position_norm ? "position_norm" : "noise_norm"; }

EnsembleResult simulate_ensemble(const EnsembleSpec& spec) {
  validate(spec);
  const TimeGrid grid = spec.grid();
  const std::size_t n = grid.size();
  const std::size_t blocks = block_count(spec);
  struct Block {
    std::vector<double> sx, sy;
    std::size_t valid = 0, diverged = 0;
    std::vector<StoredPath> stored;
  };
  // Sums are taken relative to the noise-free Euler trajectory, so deterministic
  // ensembles reproduce it exactly.
  std::vector<double> rx(n, spec.x0), ry(n, spec.y0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double drift = spec.model.force.f(grid.node(i), rx[i], ry[i]);
    rx[i + 1] = rx[i] + ry[i] * grid.step();
    ry[i + 1] = ry[i] + drift * grid.step();
    if (!std::isfinite(rx[i + 1]) || !std::isfinite(ry[i + 1])) {
      std::fill(rx.begin(), rx.end(), 0.0);
      std::fill(ry.begin(), ry.end(), 0.0);
      break;
    }
  }
  std::vector<Block> acc(blocks);
  for (auto& a : acc) {
    a.sx.assign(n, 0.0);
    a.sy.assign(n, 0.0);
  }
  for_each_path(spec, [&](std::size_t blk, const PathView& p) {
    Block& a = acc[blk];
    if (p.diverged) {
      ++a.diverged;
      return;
    }
    ++a.valid;
    for (std::size_t i = 0; i < n; ++i) {
      a.sx[i] += p.x[i] - rx[i];
      a.sy[i] += p.y[i] - ry[i];
    }
    if (p.index < spec.store_paths) {
      a.stored.push_back(StoredPath{p.index, GridFn(grid, std::vector<double>(p.x.begin(), p.x.end())),
                                    GridFn(grid, std::vector<double>(p.y.begin(), p.y.end())),
                                    GridFn(grid, std::vector<double>(p.fbm.begin(), p.fbm.end()))});
    }
  });

  EnsembleResult r{GridFn(grid, 0.0), GridFn(grid, 0.0), spec.n_paths, 0, 0, {}, {}, spec.seed,
                   effective_method(spec)};
  for (auto& a : acc) {
    for (std::size_t i = 0; i < n; ++i) {
      r.mean_x[i] += a.sx[i];
      r.mean_y[i] += a.sy[i];
    }
    r.valid += a.valid;
    r.diverged += a.diverged;
    for (auto& s : a.stored) r.paths.push_back(std::move(s));
  }
  if (r.valid > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      r.mean_x[i] = rx[i] + r.mean_x[i] / static_cast<double>(r.valid);
      r.mean_y[i] = ry[i] + r.mean_y[i] / static_cast<double>(r.valid);
    }
  }
  r.hit_counts["valid"] = HitCount{r.valid, spec.n_paths};
  return r;
}

std::pair<double, double> wilson_interval(std::size_t hits, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("Wilson interval needs at least one trial");
  constexpr double z = 1.959963984540054;
  const double nt = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / nt;
  const double denom = 1.0 + z * z / nt;
  const double centre = (p + z * z / (2.0 * nt)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nt + z * z / (4.0 * nt * nt)) / denom;
  return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

TubeResult tube_probability(const EnsembleSpec& spec, const PathPair& center, double epsilon, double beta,
                            TubeMode mode) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("tube radius must be non-negative");
  if (!(center.grid() == spec.grid())) throw std::invalid_argument("tube centre must live on the simulation grid");
  const std::size_t blocks = block_count(spec);
  std::vector<HitCount> acc(blocks);
  std::vector<std::size_t> div(blocks, 0);
  const auto phi = center.phi().values();
  for_each_path(spec, [&](std::size_t blk, const PathView& p) {
    if (p.diverged) {
      ++div[blk];
      return;
    }
    thread_local std::vector<double> d;
    if (mode == TubeMode::position_norm) {
      d.resize(p.y.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.y[i] - phi[i];
    } else {
      young_left(p, d);
    }
    ++acc[blk].trials;
    if (holder_within(d, p.dt, beta, epsilon)) ++acc[blk].hits;
  });
  HitCount total;
  std::size_t diverged = 0;
  for (std::size_t k = 0; k < blocks; ++k) {
    total.hits += acc[k].hits;
    total.trials += acc[k].trials;
    diverged += div[k];
  }
  if (total.trials == 0) throw std::invalid_argument("tube estimate has no valid trials");
  return make_tube(total.hits, total.trials, diverged);
}

RatioResult om_ratio_experiment(const EnsembleSpec& spec, const PathPair& psi1, const PathPair& psi2, double epsilon,
                                double beta) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("tube radius must be positive");
  const TimeGrid grid = spec.grid();
  if (!(psi1.grid() == grid) || !(psi2.grid() == grid)) {
    throw std::invalid_argument("tube centres must live on the simulation grid");
  }
  const double tol = 1e-12;
  if (std::abs(psi1.psi().front() - spec.x0) > tol || std::abs(psi2.psi().front() - spec.x0) > tol ||
      std::abs(psi1.phi().front() - spec.y0) > tol || std::abs(psi2.phi().front() - spec.y0) > tol) {
    throw std::invalid_argument("both paths must start at the ensemble's initial state");
  }
  struct Block {
    std::size_t h1 = 0, h2 = 0, both = 0, trials = 0, diverged = 0;
  };
  std::vector<Block> acc(block_count(spec));
  const auto phi1 = psi1.phi().values();
  const auto phi2 = psi2.phi().values();
  for_each_path(spec, [&](std::size_t blk, const PathView& p) {
    Block& a = acc[blk];
    if (p.diverged) {
      ++a.diverged;
      return;
    }
    thread_local std::vector<double> d;
    d.resize(p.y.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.y[i] - phi1[i];
    const bool in1 = holder_within(d, p.dt, beta, epsilon);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.y[i] - phi2[i];
    const bool in2 = holder_within(d, p.dt, beta, epsilon);
    ++a.trials;
    a.h1 += in1;
    a.h2 += in2;
    a.both += in1 && in2;
  });
  Block t;
  for (const Block& a : acc) {
    t.h1 += a.h1;
    t.h2 += a.h2;
    t.both += a.both;
    t.trials += a.trials;
    t.diverged += a.diverged;
  }
  if (t.trials == 0) throw std::invalid_argument("ratio experiment has no valid trials");

  RatioResult r;
  r.tube1 = make_tube(t.h1, t.trials, t.diverged);
  r.tube2 = make_tube(t.h2, t.trials, t.diverged);
  r.delta_J = om_functional(psi1, spec.model, spec.H).J - om_functional(psi2, spec.model, spec.H).J;
  if (t.h1 == 0 || t.h2 == 0) {
    r.inconclusive = true;
    r.log_ratio_mc = std::numeric_limits<double>::quiet_NaN();
    r.log_ratio_se = std::numeric_limits<double>::quiet_NaN();
    r.relative_gap = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double n = static_cast<double>(t.trials);
  const double p1 = r.tube1.p_hat, p2 = r.tube2.p_hat, p12 = static_cast<double>(t.both) / n;
  r.log_ratio_mc = std::log(static_cast<double>(t.h1)) - std::log(static_cast<double>(t.h2));
  const double var = (1.0 - p1) / (n * p1) + (1.0 - p2) / (n * p2) - 2.0 * (p12 - p1 * p2) / (n * p1 * p2);
  r.log_ratio_se = std::sqrt(std::max(0.0, var));
  const double gap = std::abs(r.log_ratio_mc - r.delta_J);
  r.relative_gap = r.delta_J != 0.0 ? gap / std::abs(r.delta_J) : gap;
  return r;
}

SmallBallResult small_ball_diagnostic(const EnsembleSpec& spec, double beta, const std::vector<double>& eps_list) {
  if (eps_list.size() < 2) throw std::invalid_argument("small-ball fit needs at least two radii");
  if (!(beta > 0.0 && beta < spec.H.H())) throw std::invalid_argument("small-ball exponent needs 0 < beta < H");
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (!(eps_list[k] > 0.0) || (k > 0 && !(eps_list[k] < eps_list[k - 1]))) {
      throw std::invalid_argument("small-ball radii must be positive and decreasing");
    }
  }
  const std::size_t m = eps_list.size();
  std::vector<std::vector<std::size_t>> hits(block_count(spec), std::vector<std::size_t>(m, 0));
  std::vector<std::size_t> trials(block_count(spec), 0);
  for_each_path(spec, [&](std::size_t blk, const PathView& p) {
    if (p.diverged) return;
    thread_local std::vector<double> d;
    young_left(p, d);
    const double norm = holder_seminorm(d, p.dt, beta);
    ++trials[blk];
    for (std::size_t k = 0; k < m; ++k) hits[blk][k] += norm <= eps_list[k];
  });

  SmallBallResult r;
  for (std::size_t b = 0; b < trials.size(); ++b) r.trials += trials[b];
  if (r.trials == 0) throw std::invalid_argument("small-ball estimate has no valid trials");
  const double power = -1.0 / (spec.H.H() - beta);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < m; ++k) {
    SmallBallPoint pt;
    pt.epsilon = eps_list[k];
    pt.x = std::pow(eps_list[k], power);
    for (const auto& h : hits) pt.hits += h[k];
    pt.p_hat = static_cast<double>(pt.hits) / static_cast<double>(r.trials);
    pt.used = pt.hits >= 10;
    if (pt.used) {
      const double y = std::log(pt.p_hat);
      sx += pt.x;
      sy += y;
      sxx += pt.x * pt.x;
      sxy += pt.x * y;
      ++used;
    }
    r.points.push_back(pt);
  }
  if (used < 2) throw NumericalFailure("small-ball fit has fewer than two radii with at least 10 hits", used);
  const double u = static_cast<double>(used);
  const double den = u * sxx - sx * sx;
  r.slope = (u * sxy - sx * sy) / den;
  r.intercept = (sy - r.slope * sx) / u;
  return r;
}

}  // namespace omf
