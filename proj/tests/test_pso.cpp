#include <doctest.h>

#include <atomic>
#include <random>

#include "psopf/pso.hpp"

using namespace psopf;

namespace {

Bounds<double> box(int dims, double lo, double hi) {
  return {Eigen::VectorXd::Constant(dims, lo), Eigen::VectorXd::Constant(dims, hi)};
}

double sphere(const Eigen::VectorXd& x) { return x.squaredNorm(); }

}  // namespace

TEST_CASE("inertia weight decays linearly between its endpoints") {
  PsoConfig cfg;
  CHECK(inertia_weight(cfg, 0) == 0.9);
  CHECK(inertia_weight(cfg, cfg.iter_max) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(inertia_weight(cfg, 250) == doctest::Approx(0.65));
  cfg.iter_max = 100;
  CHECK(inertia_weight(cfg, 10) - inertia_weight(cfg, 11) == doctest::Approx(0.005));
}

TEST_CASE("velocity with zero acceleration is the damped previous velocity") {
  PsoConfig cfg;
  cfg.c1 = 0.0;
  cfg.c2 = 0.0;
  Particle<double> p;
  p.position = Eigen::Vector2d(1.0, 2.0);
  p.velocity = Eigen::Vector2d(0.5, -3.0);
  p.pbest_position = Eigen::Vector2d(0.0, 0.0);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd v_max = Eigen::Vector2d(1.0, 1.0);
  const Eigen::VectorXd v = update_velocity(p, Eigen::VectorXd(Eigen::Vector2d(5.0, 5.0)), 0.5, cfg, v_max, rng);
  CHECK(v(0) == doctest::Approx(0.25));
  CHECK(v(1) == doctest::Approx(-1.0));
}

TEST_CASE("velocity at the best positions keeps only inertia") {
  PsoConfig cfg;
  Particle<double> p;
  p.position = Eigen::Vector3d(1.0, 2.0, 3.0);
  p.velocity = Eigen::Vector3d(0.1, 0.2, -0.1);
  p.pbest_position = p.position;
  std::mt19937_64 rng(9);
  const Eigen::VectorXd v = update_velocity(p, p.position, 0.9, cfg, Eigen::VectorXd(Eigen::VectorXd::Constant(3, 10.0)), rng);
  CHECK((v - 0.9 * p.velocity).norm() < 1e-15);
}

TEST_CASE("velocity update draws two uniforms per dimension") {
  PsoConfig cfg;
  Particle<double> p;
  p.position = Eigen::Vector2d(0.0, 0.0);
  p.velocity = Eigen::Vector2d(0.0, 0.0);
  p.pbest_position = Eigen::Vector2d(1.0, 1.0);
  const Eigen::VectorXd gbest = Eigen::Vector2d(-1.0, 2.0);
  std::mt19937_64 rng(77), copy(77);
  const Eigen::VectorXd v = update_velocity(p, gbest, 0.7, cfg, Eigen::VectorXd(Eigen::VectorXd::Constant(2, 100.0)), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int d = 0; d < 2; ++d) {
    const double u1 = unit(copy), u2 = unit(copy);
    CHECK(v(d) == doctest::Approx(2.0 * u1 * (p.pbest_position(d) - 0.0) + 2.0 * u2 * (gbest(d) - 0.0)));
  }
}

TEST_CASE("position update clamps at the bound and stops that dimension") {
  const auto b = box(2, -1.0, 1.0);
  Particle<double> p;
  p.position = Eigen::Vector2d(0.9, 0.0);
  p.velocity = Eigen::Vector2d::Zero();
  update_position(p, Eigen::VectorXd(Eigen::Vector2d(0.3, -0.4)), b);
  CHECK(p.position(0) == 1.0);
  CHECK(p.velocity(0) == 0.0);
  CHECK(p.position(1) == doctest::Approx(-0.4));
  CHECK(p.velocity(1) == doctest::Approx(-0.4));
  update_position(p, Eigen::VectorXd(Eigen::Vector2d(0.0, -0.8)), b);
  CHECK(p.position(1) == -1.0);
  CHECK(p.velocity(1) == 0.0);
}

TEST_CASE("velocity limit is a fraction of each range") {
  PsoConfig cfg;
  Bounds<double> b{Eigen::Vector2d(0.0, -2.0), Eigen::Vector2d(1.0, 2.0)};
  const auto v = velocity_limit(b, cfg);
  CHECK(v(0) == doctest::Approx(0.15));
  CHECK(v(1) == doctest::Approx(0.6));
}

TEST_CASE("same seed gives identical runs, threaded or not") {
  PsoConfig cfg;
  cfg.seed = 123;
  cfg.iter_max = 80;
  const auto a = run<double>(sphere, box(4, -5, 5), cfg);
  const auto b = run<double>(sphere, box(4, -5, 5), cfg);
  CHECK(a.gbest_value == b.gbest_value);
  CHECK(a.gbest_position == b.gbest_position);
  CHECK(a.trace == b.trace);
  cfg.threads = 4;
  const auto c = run<double>(sphere, box(4, -5, 5), cfg);
  CHECK(a.trace == c.trace);
  CHECK(a.gbest_position == c.gbest_position);
  cfg.threads = 1;
  cfg.seed = 124;
  CHECK(run<double>(sphere, box(4, -5, 5), cfg).trace != a.trace);
}

TEST_CASE("sphere benchmark reaches 1e-4 on twenty seeds") {
  PsoConfig cfg;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.seed = seed;
    const auto res = run<double>(sphere, box(10, -5, 5), cfg);
    CHECK(res.gbest_value <= 1e-4);
  }
}

TEST_CASE("sphere misses only when the stagnation stop comes early") {
  PsoConfig cfg;
  cfg.seed = 0;
  const auto stalled = run<double>(sphere, box(10, -5, 5), cfg);
  CHECK(stalled.terminated_by == Termination::Stagnation);
  CHECK(stalled.gbest_value > 1e-4);
  cfg.stagnation_window = cfg.iter_max;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    cfg.seed = seed;
    CHECK(run<double>(sphere, box(10, -5, 5), cfg).gbest_value <= 1e-4);
  }
}

TEST_CASE("stagnation fires exactly at the window on a constant objective") {
  PsoConfig cfg;
  int calls = 0;
  const auto res = run<double>([&](const Eigen::VectorXd&) { ++calls; return 3.0; }, box(3, 0, 1), cfg);
  CHECK(res.terminated_by == Termination::Stagnation);
  CHECK(res.iterations_run == cfg.stagnation_window);
  CHECK(calls == cfg.stagnation_window * cfg.n_particles);
  cfg.stagnation_window = 7;
  CHECK(run<double>([](const Eigen::VectorXd&) { return 3.0; }, box(3, 0, 1), cfg).iterations_run == 7);
}

TEST_CASE("iteration cap ends the run") {
  PsoConfig cfg;
  cfg.iter_max = 3;
  const auto res = run<double>(sphere, box(3, -1, 1), cfg);
  CHECK(res.terminated_by == Termination::IterMax);
  CHECK(res.iterations_run == 3);
  CHECK(res.trace.size() == 3);
}

TEST_CASE("best value never increases and positions stay in the box") {
  PsoConfig cfg;
  cfg.seed = 5;
  cfg.iter_max = 200;
  const auto b = box(3, -2, 3);
  std::atomic<bool> outside{false};
  const auto res = run<double>(
      [&](const Eigen::VectorXd& x) {
        if ((x.array() < b.lower.array()).any() || (x.array() > b.upper.array()).any()) outside = true;
        return (x.array() - 1.5).square().sum();
      },
      b, cfg);
  CHECK_FALSE(outside.load());
  for (std::size_t k = 1; k < res.trace.size(); ++k) CHECK(res.trace[k] <= res.trace[k - 1]);
  CHECK(res.gbest_value == res.trace.back());
}

TEST_CASE("non-finite objective values count as infinity") {
  PsoConfig cfg;
  cfg.iter_max = 30;
  const auto res = run<double>(
      [](const Eigen::VectorXd& x) { return x(0) > 0 ? std::numeric_limits<double>::quiet_NaN() : x.squaredNorm(); },
      box(2, -1, 1), cfg);
  CHECK(std::isfinite(res.gbest_value));
  CHECK(res.gbest_position(0) <= 0.0);
}

TEST_CASE("a seed at the optimum is the first global best") {
  PsoConfig cfg;
  cfg.iter_max = 1;
  const std::vector<Eigen::VectorXd> seeds{Eigen::VectorXd::Zero(4)};
  const auto res = run<double>(sphere, box(4, -5, 5), cfg, seeds);
  CHECK(res.gbest_value == 0.0);
  CHECK_THROWS_AS(run<double>(sphere, box(4, -5, 5), cfg, {Eigen::VectorXd::Zero(3)}), std::invalid_argument);
}

TEST_CASE("float swarm works too") {
  PsoConfig cfg;
  Bounds<float> b{Eigen::VectorXf::Constant(3, -1.f), Eigen::VectorXf::Constant(3, 1.f)};
  const auto res = run<float>([](const Eigen::VectorXf& x) { return x.squaredNorm(); }, b, cfg);
  CHECK(res.gbest_value < 1e-3f);
}

TEST_CASE("configuration checks") {
  PsoConfig cfg;
  cfg.n_particles = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.w_min = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.v_max_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  CHECK_THROWS_AS(run<double>(sphere, Bounds<double>{Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)}, cfg),
                  std::invalid_argument);
}
