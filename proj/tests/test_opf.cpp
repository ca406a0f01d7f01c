#include <doctest.h>

#include <cmath>
#include <random>

#include "psopf/opf.hpp"
#include "support.hpp"

using namespace psopf;

namespace {

Eigen::VectorXd random_controls(const ControlSet& cs, std::mt19937_64& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(cs.size()));
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    std::uniform_real_distribution<double> u(cs.lower(k), cs.upper(k));
    v(k) = u(rng);
  }
  return v;
}

PsoConfig quick(std::uint64_t seed, int iters) {
  PsoConfig cfg;
  cfg.seed = seed;
  cfg.iter_max = iters;
  return cfg;
}

}  // namespace

TEST_CASE("control names round trip") {
  const Network net = testing::ieee30();
  for (const auto& name : full_controls(net).names(net)) {
    CHECK(control_name(net, parse_control_name(net, name)) == name);
  }
  CHECK(parse_control_name(net, "T28-27").kind == ControlKind::Tap);
  CHECK(parse_control_name(net, "QC10").kind == ControlKind::Shunt);
  CHECK_THROWS(parse_control_name(net, "PG3"));
  CHECK_THROWS(parse_control_name(net, "T1-2"));
  CHECK_THROWS(parse_control_name(net, "XY1"));
}

TEST_CASE("control sets and their bounds") {
  const Network net = testing::ieee30();
  const auto full = full_controls(net);
  CHECK(full.size() == 5 + 6 + 4 + 9);
  CHECK(parse_control_spec(net, "pg+vg").size() == 11);
  CHECK(parse_control_spec(net, "pg").size() == 5);
  const auto subset = parse_control_spec(net, "pg+vg:1,2,5,8");
  CHECK(subset.names(net) == std::vector<std::string>{"PG2", "PG5", "PG8", "PG11", "PG13", "VG1", "VG2", "VG5", "VG8"});
  const auto list = parse_control_spec(net, "PG2,T6-9,QC24");
  REQUIRE(list.size() == 3);
  CHECK(list.lower(0) == doctest::Approx(0.2));
  CHECK(list.upper(0) == doctest::Approx(0.8));
  CHECK(list.lower(1) == 0.9);
  CHECK(list.upper(2) == 0.05);
  CHECK_THROWS_AS(make_control_set(net, {{ControlKind::GenP, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(make_control_set(net, {{ControlKind::Tap, 10}, {ControlKind::Tap, 10}}), std::invalid_argument);
  CHECK_THROWS(parse_control_spec(net, "bogus"));
}

TEST_CASE("apply_controls copies and sets") {
  const Network net = testing::ieee30();
  const Network before = net;
  const auto cs = full_controls(net);
  std::mt19937_64 rng(2);
  const Eigen::VectorXd v = random_controls(cs, rng);
  const Network moved = apply_controls(net, cs, v);
  CHECK(net == before);
  CHECK((control_values(moved, cs) - v).cwiseAbs().maxCoeff() == 0.0);
  const auto vg1 = parse_control_spec(net, "VG1");
  const Network raised = apply_controls(net, vg1, Eigen::VectorXd::Constant(1, 1.08));
  CHECK(raised.buses[0].v_mag == 1.08);
  CHECK(raised.generators[0].v_setpoint == 1.08);
  CHECK_THROWS_AS(apply_controls(net, cs, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("fuel cost by hand") {
  const Network net = testing::ieee30();
  Eigen::VectorXd p(6);
  p << 1.0, 0.4, 0.15, 0.1, 0.1, 0.12;
  // a + b P + c P^2 with P in MW
  const double expect = (2.0 * 100 + 0.00375 * 1e4) + (1.75 * 40 + 0.0175 * 1600) + (1.0 * 15 + 0.0625 * 225) +
                        (3.25 * 10 + 0.00834 * 100) + (3.0 * 10 + 0.025 * 100) + (3.0 * 12 + 0.025 * 144);
  CHECK(fuel_cost(net, p) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("penalty arithmetic") {
  ViolationReport rep;
  rep.voltage.push_back({20, 0.94, 0.95, Bound::Lower});
  PenaltyConfig pen;
  CHECK(penalty_value(rep, pen) == doctest::Approx(100.0));
  pen.lambda_v = 2.0;
  CHECK(penalty_value(rep, pen) == doctest::Approx(200.0));
  rep.line.push_back({0, 1, 2, 1.4, 1.3});
  pen = {};
  CHECK(penalty_value(rep, pen) == doctest::Approx(100.0 + 1e6 * 0.01));
  rep.slack_p = SlackViolation{2.1, 2.0, Bound::Upper};
  rep.reactive.push_back({1, 2, -0.25, -0.2, Bound::Lower});
  CHECK(penalty_value(rep, pen) == doctest::Approx(100.0 + 1e4 + 1e4 + 2500.0));
  CHECK(penalty_value(ViolationReport{}, pen) == 0.0);
  pen.lambda = 0.0;
  CHECK_THROWS_AS(pen.validate(), std::invalid_argument);
}

TEST_CASE("penalized value equals fuel cost exactly when nothing is violated") {
  const Network net = testing::ieee30();
  const auto cs = full_controls(net);
  const PenaltyConfig pen;
  std::mt19937_64 rng(8);
  int clean = 0, dirty = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::VectorXd v = random_controls(cs, rng);
    const double value = evaluate_particle(net, cs, v, pen);
    const Network moved = apply_controls(net, cs, v);
    PowerFlowSolution sol;
    try {
      sol = solve_newton_raphson(moved);
    } catch (const PowerFlowError&) {
      CHECK(std::isinf(value));
      continue;
    }
    const double fuel = fuel_cost(moved, sol.gen_p);
    if (check_violations(moved, sol).empty()) {
      ++clean;
      CHECK(std::abs(value - fuel) <= 1e-9);
    } else {
      ++dirty;
      CHECK(value - fuel > 1e-9);
    }
  }
  CHECK(dirty > 0);
  MESSAGE(clean << " clean and " << dirty << " violating samples");
}

TEST_CASE("raising lambda never lowers a violating objective") {
  const Network net = testing::ieee30();
  const auto cs = full_controls(net);
  const Eigen::VectorXd v = control_values(net, cs);
  double previous = 0.0;
  for (double lambda : {1e2, 1e4, 1e6, 1e8}) {
    PenaltyConfig pen;
    pen.lambda = lambda;
    const double value = evaluate_particle(net, cs, v, pen);
    CHECK(value >= previous);
    previous = value;
  }
}

TEST_CASE("a diverging power flow scores infinity") {
  Network net = testing::ieee30();
  for (auto& br : net.branches) br.x *= 100.0;
  const auto cs = pg_vg_controls(net);
  CHECK(std::isinf(evaluate_particle(net, cs, control_values(net, cs), PenaltyConfig{})));
  CHECK_THROWS_AS(solve_opf(net, cs, PenaltyConfig{}, quick(1, 3)), InfeasibleControlSet);
}

TEST_CASE("OPF result is reproducible and consistent with a re-solve") {
  const Network net = testing::ieee30();
  const auto cs = parse_control_spec(net, "pg+vg");
  const auto a = solve_opf(net, cs, PenaltyConfig{}, quick(4, 40));
  const auto b = solve_opf(net, cs, PenaltyConfig{}, quick(4, 40));
  CHECK(a.controls == b.controls);
  CHECK(a.trace == b.trace);
  CHECK(a.best_cost == b.best_cost);
  const auto sol = solve_newton_raphson(apply_controls(net, cs, a.controls));
  CHECK(fuel_cost(a.network, sol.gen_p) == doctest::Approx(a.best_cost).epsilon(1e-9));
  CHECK(a.penalized_best >= a.best_cost - 1e-9);
  CHECK(a.penalized_best == a.trace.back());
  CHECK(a.iterations == 40);
}

TEST_CASE("auto selection keeps the top controls of every violated quantity") {
  const Network net = testing::ieee30();
  const OperatingPoint op{net, solve_newton_raphson(net)};
  const auto rep = check_violations(net, op.solution);
  const auto s = voltage_sensitivity(op);
  const auto ranking = rank_controls(s, current_sensitivity(op), rep, net, default_candidates(s));
  const auto cs = auto_select_controls(net, ranking);
  const auto names = cs.names(net);
  for (const char* pg : {"PG2", "PG5", "PG8", "PG11", "PG13"}) {
    CHECK(std::find(names.begin(), names.end(), pg) != names.end());
  }
  for (const auto& q : ranking.per_quantity) {
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(std::find(names.begin(), names.end(), q.controls[k].control) != names.end());
    }
  }
  CHECK(cs.size() < full_controls(net).size());
  CHECK(auto_select_controls(net, ControlRanking{}).size() == 5);
}

TEST_CASE("sweep checks ordering and records failures per level") {
  const Network net = testing::ieee30();
  SweepOptions so;
  CHECK_THROWS_AS(loading_sweep(net, {200.0, 150.0}, so, PenaltyConfig{}, quick(1, 5)), std::invalid_argument);
  so.fixed_controls = parse_control_spec(net, "pg+vg");
  const auto out = loading_sweep(net, {150.0, 5000.0}, so, PenaltyConfig{}, quick(1, 5));
  REQUIRE(out.size() == 2);
  CHECK(out[0].result.has_value());
  CHECK(out[0].error.empty());
  CHECK(out[0].control_set.size() == 11);
  CHECK_FALSE(out[1].error.empty());
}
