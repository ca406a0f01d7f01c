#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "psopf/powerflow.hpp"
#include "support.hpp"

using namespace psopf;

namespace {

Eigen::MatrixXd fd_jacobian(const Network& net, const AdmittanceMatrix& y, const Eigen::VectorXd& vm,
                            const Eigen::VectorXd& va) {
  const BusIndexing idx(net);
  const auto f0 = compute_mismatch(net, y, vm, va);
  const Eigen::Index n_ang = static_cast<Eigen::Index>(idx.non_slack.size());
  const Eigen::Index n_mag = static_cast<Eigen::Index>(idx.pq.size());
  Eigen::MatrixXd j(f0.size(), n_ang + n_mag);
  const double h = 1e-7;
  for (Eigen::Index k = 0; k < n_ang + n_mag; ++k) {
    Eigen::VectorXd vm_p = vm, vm_m = vm, va_p = va, va_m = va;
    if (k < n_ang) {
      va_p(idx.non_slack[static_cast<std::size_t>(k)]) += h;
      va_m(idx.non_slack[static_cast<std::size_t>(k)]) -= h;
    } else {
      vm_p(idx.pq[static_cast<std::size_t>(k - n_ang)]) += h;
      vm_m(idx.pq[static_cast<std::size_t>(k - n_ang)]) -= h;
    }
    j.col(k) = (compute_mismatch(net, y, vm_p, va_p) - compute_mismatch(net, y, vm_m, va_m)) / (2 * h);
  }
  return j;
}

}  // namespace

TEST_CASE("jacobian matches central differences of the mismatch") {
  const Network net = testing::ieee30();
  const auto y = build_admittance(net);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd vm(30), va(30);
    for (int i = 0; i < 30; ++i) {
      vm(i) = mag(rng);
      va(i) = ang(rng);
    }
    const auto j = build_jacobian(net, y, vm, va);
    const auto fd = fd_jacobian(net, y, vm, va);
    CHECK((j - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("mismatch is scheduled minus calculated") {
  const Network net = testing::two_bus(0.0, 0.1, 0.0, 0.5, 0.2);
  const auto y = build_admittance(net);
  Eigen::VectorXd vm(2), va(2);
  vm << 1.0, 0.95;
  va << 0.0, -0.05;
  const auto s = bus_injection<double>(y.y, vm, va);
  const auto mis = compute_mismatch(net, y, vm, va);
  REQUIRE(mis.size() == 2);
  CHECK(mis(0) == doctest::Approx(-0.5 - s(1).real()));
  CHECK(mis(1) == doctest::Approx(-0.2 - s(1).imag()));
}

TEST_CASE("two-bus lossless line matches the closed-form receiving voltage") {
  const double x = 0.1, p = 0.8, q = 0.3;
  const Network net = testing::two_bus(0.0, x, 0.0, p, q);
  const auto sol = solve_newton_raphson(net);
  // V^4 + (2 q x - 1) V^2 + x^2 (p^2 + q^2) = 0, upper root
  const double b = 1.0 - 2 * q * x;
  const double v2 = std::sqrt((b + std::sqrt(b * b - 4 * x * x * (p * p + q * q))) / 2);
  CHECK(sol.v_mag(1) == doctest::Approx(v2).epsilon(1e-7));
  CHECK(std::sin(-sol.v_angle(1)) * v2 / x == doctest::Approx(p).epsilon(1e-6));
  CHECK(sol.slack_p == doctest::Approx(p).epsilon(1e-6));
}

TEST_CASE("line flows by hand on two buses") {
  const Network net = testing::two_bus(0.02, 0.1, 0.04, 0.6, 0.2);
  const auto sol = solve_newton_raphson(net);
  const Complex v1 = std::polar(sol.v_mag(0), sol.v_angle(0));
  const Complex v2 = std::polar(sol.v_mag(1), sol.v_angle(1));
  const Complex z(0.02, 0.1);
  const Complex i12 = (v1 - v2) / z + Complex(0, 0.02) * v1;
  const Complex i21 = (v2 - v1) / z + Complex(0, 0.02) * v2;
  const Complex s12 = v1 * std::conj(i12);
  const Complex s21 = v2 * std::conj(i21);
  CHECK(std::abs(sol.s_from(0) - s12) < 1e-10);
  CHECK(std::abs(sol.s_to(0) - s21) < 1e-10);
  CHECK(std::abs(sol.branch_current(0) - i12) < 1e-10);
  CHECK(sol.branch_flow_mva(0) == doctest::Approx(std::max(std::abs(s12), std::abs(s21))));
  CHECK(std::abs(s21.real() + 0.6) < 1e-6);
}

TEST_CASE("base case converges and reports the expected violations") {
  const Network net = testing::ieee30();
  const auto sol = solve_newton_raphson(net);
  CHECK(sol.iterations == 4);
  CHECK(sol.max_mismatch <= 1e-6);
  CHECK(sol.mismatch_history.size() == 4);
  CHECK(sol.slack_p * 100 == doctest::Approx(209.652).epsilon(1e-4));

  const auto rep = check_violations(net, sol);
  std::vector<int> low;
  for (const auto& v : rep.voltage) {
    CHECK(v.bound == Bound::Lower);
    low.push_back(v.bus);
  }
  CHECK(low == std::vector<int>{18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 29, 30});
  REQUIRE(rep.line.size() == 1);
  CHECK(rep.line[0].from_bus == 1);
  CHECK(rep.line[0].to_bus == 2);
  CHECK(rep.line[0].flow > 1.3);
  CHECK(rep.reactive.empty());
  REQUIRE(rep.slack_p.has_value());
  CHECK(rep.slack_p->bound == Bound::Upper);
}

TEST_CASE("power balance: generation minus demand equals branch losses") {
  const Network net = testing::ieee30();
  const auto sol = solve_newton_raphson(net);
  double losses = 0.0;
  for (Eigen::Index k = 0; k < sol.s_from.size(); ++k) losses += (sol.s_from(k) + sol.s_to(k)).real();
  CHECK(losses > 0.0);
  CHECK(sol.gen_p.sum() - net.total_p_demand() == doctest::Approx(losses).epsilon(1e-6));
  CHECK(sol.p_injection.sum() == doctest::Approx(losses).epsilon(1e-6));
}

TEST_CASE("generator outputs close the reactive balance") {
  const Network net = testing::ieee30();
  const auto sol = solve_newton_raphson(net);
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto bus = static_cast<Eigen::Index>(net.bus_index(net.generators[g].bus));
    const double demand = net.buses[static_cast<std::size_t>(bus)].q_demand;
    CHECK(sol.gen_q(static_cast<Eigen::Index>(g)) - demand ==
          doctest::Approx(sol.q_injection(bus)).epsilon(1e-9));
  }
}

TEST_CASE("flat and perturbed starts reach the same solution") {
  const Network net = testing::ieee30();
  const auto ref = solve_newton_raphson(net);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    PowerFlowSolution init = ref;
    for (Eigen::Index i = 0; i < 30; ++i) {
      if (net.buses[static_cast<std::size_t>(i)].kind == BusKind::Load) init.v_mag(i) += d(rng);
      if (net.buses[static_cast<std::size_t>(i)].kind != BusKind::Slack) init.v_angle(i) += d(rng);
    }
    const auto sol = solve_newton_raphson(net, init);
    CHECK((sol.v_mag - ref.v_mag).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((sol.v_angle - ref.v_angle).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("a converged state takes one iteration") {
  const Network net = testing::ieee30();
  const auto ref = solve_newton_raphson(net, std::nullopt, {1e-10, 30});
  const auto again = solve_newton_raphson(net, ref);
  CHECK(again.iterations == 1);
}

TEST_CASE("stressed network fails with a power-flow error") {
  Network net = testing::ieee30();
  for (auto& br : net.branches) br.x *= 100.0;
  CHECK_THROWS_AS(solve_newton_raphson(net), PowerFlowError);
}

TEST_CASE("iteration cap raises non-convergence") {
  const Network net = testing::ieee30();
  try {
    solve_newton_raphson(net, std::nullopt, {1e-6, 2});
    FAIL("expected PowerFlowError");
  } catch (const PowerFlowError& e) {
    CHECK(e.kind() == PowerFlowError::Kind::NonConvergence);
    CHECK(e.last_mismatch() > 1e-6);
  }
}

TEST_CASE("violation tolerance suppresses small excursions only") {
  const Network net = testing::ieee30();
  const auto sol = solve_newton_raphson(net);
  CHECK(check_violations(net, sol, 1e-4).voltage.size() == 12);
  CHECK(check_violations(net, sol, 1.0).empty());
}

TEST_CASE("half load has no low voltages") {
  const Network net = scale_load(testing::ieee30(), 141.7);
  const auto sol = solve_newton_raphson(net);
  CHECK(check_violations(net, sol).voltage.empty());
}
