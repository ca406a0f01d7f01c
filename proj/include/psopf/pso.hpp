#pragma once

// Bounded particle swarm optimizer: global-best topology, linearly decaying
// inertia weight, per-dimension velocity clamping, clamp-and-stop bound
// handling and termination when the rounded best value stalls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace psopf {

struct PsoConfig {
  int n_particles = 10;
  double c1 = 2.0;
  double c2 = 2.0;
  double w_max = 0.9;
  double w_min = 0.4;
  int iter_max = 500;
  double v_max_fraction = 0.15;
  int stagnation_window = 50;
  int stagnation_digits = 5;
  std::uint64_t seed = 0;
  int threads = 1;  // objective evaluations in flight per iteration

  void validate() const {
    if (n_particles < 2) throw std::invalid_argument("PSO needs at least two particles");
    if (!(0.0 < w_min && w_min <= w_max)) throw std::invalid_argument("PSO needs 0 < w_min <= w_max");
    if (!(v_max_fraction > 0.0 && v_max_fraction <= 1.0)) {
      throw std::invalid_argument("v_max_fraction must lie in (0, 1]");
    }
    if (iter_max < 1) throw std::invalid_argument("iter_max must be positive");
    if (stagnation_window < 1) throw std::invalid_argument("stagnation_window must be positive");
    if (stagnation_digits < 0) throw std::invalid_argument("stagnation_digits must be non-negative");
    if (threads < 1) throw std::invalid_argument("threads must be positive");
  }
};

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Bounds {
  Vec<Scalar> lower;
  Vec<Scalar> upper;

  Eigen::Index dims() const noexcept { return lower.size(); }
  Vec<Scalar> range() const { return upper - lower; }
};

template <typename Scalar>
struct Particle {
  Vec<Scalar> position;
  Vec<Scalar> velocity;
  Vec<Scalar> pbest_position;
  Scalar pbest_value = std::numeric_limits<Scalar>::infinity();
};

enum class Termination { Stagnation, IterMax };

template <typename Scalar>
struct PsoResult {
  Vec<Scalar> gbest_position;
  Scalar gbest_value = std::numeric_limits<Scalar>::infinity();
  int iterations_run = 0;
  std::vector<Scalar> trace;
  Termination terminated_by = Termination::IterMax;
};

/// w = w_max - (w_max - w_min) / iter_max * iter
inline double inertia_weight(const PsoConfig& cfg, int iter) {
  return cfg.w_max - (cfg.w_max - cfg.w_min) / cfg.iter_max * iter;
}

/// Per-dimension speed limit: v_max_fraction of each dimension's range.
template <typename Scalar>
Vec<Scalar> velocity_limit(const Bounds<Scalar>& bounds, const PsoConfig& cfg) {
  return bounds.range() * static_cast<Scalar>(cfg.v_max_fraction);
}

/// One velocity step. Draws U ~ [0, 1) independently for the cognitive and
/// social terms of every dimension, in dimension order (cognitive first).
template <typename Scalar, typename Rng>
Vec<Scalar> update_velocity(const Particle<Scalar>& p, const Vec<Scalar>& gbest, double w,
                            const PsoConfig& cfg, const Vec<Scalar>& v_max, Rng& rng) {
  std::uniform_real_distribution<Scalar> unit(Scalar(0), Scalar(1));
  Vec<Scalar> v(p.velocity.size());
  for (Eigen::Index d = 0; d < v.size(); ++d) {
    const Scalar u1 = unit(rng);
    const Scalar u2 = unit(rng);
    const Scalar raw = static_cast<Scalar>(w) * p.velocity(d) +
                       static_cast<Scalar>(cfg.c1) * u1 * (p.pbest_position(d) - p.position(d)) +
                       static_cast<Scalar>(cfg.c2) * u2 * (gbest(d) - p.position(d));
    v(d) = std::clamp(raw, -v_max(d), v_max(d));
  }
  return v;
}

/// Move the particle by `new_velocity` and clamp to the box. A dimension that
/// hits a bound keeps the bound value and has its velocity zeroed.
template <typename Scalar>
const Vec<Scalar>& update_position(Particle<Scalar>& p, const Vec<Scalar>& new_velocity,
                                   const Bounds<Scalar>& bounds) {
  p.velocity = new_velocity;
  for (Eigen::Index d = 0; d < p.position.size(); ++d) {
    const Scalar next = p.position(d) + new_velocity(d);
    if (next > bounds.upper(d)) {
      p.position(d) = bounds.upper(d);
      p.velocity(d) = Scalar(0);
    } else if (next < bounds.lower(d)) {
      p.position(d) = bounds.lower(d);
      p.velocity(d) = Scalar(0);
    } else {
      p.position(d) = next;
    }
  }
  return p.position;
}

namespace detail {

template <typename Scalar>
Scalar round_digits(Scalar v, int digits) {
  if (!std::isfinite(v)) return v;
  const Scalar scale = std::pow(Scalar(10), digits);
  return std::round(v * scale) / scale;
}

template <typename Scalar, typename Objective>
void evaluate_all(const std::vector<Particle<Scalar>>& swarm, Objective& objective, int threads,
                  std::vector<Scalar>& values) {
  const auto sanitize = [](Scalar v) {
    return std::isfinite(v) ? v : std::numeric_limits<Scalar>::infinity();
  };
  const std::size_t n = swarm.size();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) values[i] = sanitize(objective(swarm[i].position));
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) values[i] = sanitize(objective(swarm[i].position));
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Minimise `objective` over the box `bounds`. Particles start uniformly in
/// the box with zero velocity; the first entries of `seeds` replace the
/// initial positions of the first particles (clamped into the box).
/// Non-finite objective values count as +infinity. When cfg.threads > 1 the
/// objective is called concurrently and must be safe for that.
template <typename Scalar, typename Objective>
PsoResult<Scalar> run(Objective&& objective, const Bounds<Scalar>& bounds, const PsoConfig& cfg,
                      const std::vector<Vec<Scalar>>& seeds = {}) {
  cfg.validate();
  const Eigen::Index dims = bounds.dims();
  if (bounds.upper.size() != dims) throw std::invalid_argument("bound vectors differ in length");
  for (Eigen::Index d = 0; d < dims; ++d) {
    if (!std::isfinite(bounds.lower(d)) || !std::isfinite(bounds.upper(d)) ||
        !(bounds.lower(d) < bounds.upper(d))) {
      throw std::invalid_argument("PSO bounds must be finite with lower < upper");
    }
  }

  std::mt19937_64 rng(cfg.seed);
  const Vec<Scalar> v_max = velocity_limit(bounds, cfg);
  const auto n = static_cast<std::size_t>(cfg.n_particles);

  std::vector<Particle<Scalar>> swarm(n);
  for (auto& p : swarm) {
    p.position.resize(dims);
    for (Eigen::Index d = 0; d < dims; ++d) {
      std::uniform_real_distribution<Scalar> init(bounds.lower(d), bounds.upper(d));
      p.position(d) = init(rng);
    }
    p.velocity = Vec<Scalar>::Zero(dims);
    p.pbest_position = p.position;
  }
  for (std::size_t s = 0; s < seeds.size() && s < n; ++s) {
    if (seeds[s].size() != dims) throw std::invalid_argument("seed position has wrong dimension");
    swarm[s].position = seeds[s].cwiseMax(bounds.lower).cwiseMin(bounds.upper);
    swarm[s].pbest_position = swarm[s].position;
  }

  PsoResult<Scalar> result;
  result.gbest_position = swarm.front().position;
  std::vector<Scalar> values(n);
  int stable_run = 0;
  Scalar last_rounded = std::numeric_limits<Scalar>::quiet_NaN();

  for (int iter = 0; iter < cfg.iter_max; ++iter) {
    detail::evaluate_all(swarm, objective, cfg.threads, values);
    for (std::size_t i = 0; i < n; ++i) {
      auto& p = swarm[i];
      if (values[i] < p.pbest_value) {
        p.pbest_value = values[i];
        p.pbest_position = p.position;
      }
      if (p.pbest_value < result.gbest_value) {
        result.gbest_value = p.pbest_value;
        result.gbest_position = p.pbest_position;
      }
    }
    result.trace.push_back(result.gbest_value);
    result.iterations_run = iter + 1;

    const Scalar rounded = detail::round_digits(result.gbest_value, cfg.stagnation_digits);
    stable_run = rounded == last_rounded ? stable_run + 1 : 1;
    last_rounded = rounded;
    if (stable_run >= cfg.stagnation_window) {
      result.terminated_by = Termination::Stagnation;
      return result;
    }
    if (iter + 1 == cfg.iter_max) break;

    const double w = inertia_weight(cfg, iter);
    for (auto& p : swarm) {
      const Vec<Scalar> v = update_velocity(p, result.gbest_position, w, cfg, v_max, rng);
      update_position(p, v, bounds);
    }
  }
  result.terminated_by = Termination::IterMax;
  return result;
}

}  // namespace psopf
