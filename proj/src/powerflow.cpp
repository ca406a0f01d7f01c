#include "psopf/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

namespace psopf {

BusIndexing::BusIndexing(const Network& net) {
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    switch (net.buses[i].kind) {
      case BusKind::Slack: slack = idx; break;
      case BusKind::Generator: pv.push_back(idx); non_slack.push_back(idx); break;
      case BusKind::Load: pq.push_back(idx); non_slack.push_back(idx); break;
    }
  }
}

ScheduledInjection scheduled_injection(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  ScheduledInjection s{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    s.p(i) = -net.buses[i].p_demand;
    s.q(i) = -net.buses[i].q_demand;
  }
  for (const auto& g : net.generators) {
    const auto i = static_cast<Eigen::Index>(net.bus_index(g.bus));
    s.p(i) += g.p_out;
    s.q(i) += g.q_out;
  }
  for (const auto& c : net.shunts) {
    s.q(static_cast<Eigen::Index>(net.bus_index(c.bus))) += c.q_injection;
  }
  return s;
}

Eigen::VectorXd compute_mismatch(const Network& net, const AdmittanceMatrix& y,
                                 const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_angle) {
  const BusIndexing idx(net);
  const auto sched = scheduled_injection(net);
  const ComplexVector s = bus_injection<double>(y.y, v_mag, v_angle);
  const auto np = static_cast<Eigen::Index>(idx.non_slack.size());
  const auto nq = static_cast<Eigen::Index>(idx.pq.size());
  Eigen::VectorXd f(np + nq);
  for (Eigen::Index k = 0; k < np; ++k) {
    const auto i = idx.non_slack[k];
    f(k) = sched.p(i) - s(i).real();
  }
  for (Eigen::Index k = 0; k < nq; ++k) {
    const auto i = idx.pq[k];
    f(np + k) = sched.q(i) - s(i).imag();
  }
  return f;
}

InjectionDerivatives injection_derivatives(const AdmittanceMatrix& y, const ComplexVector& v) {
  const ComplexVector ibus = y.y * v;
  const ComplexVector v_unit = v.array() / v.array().abs();
  const Complex j(0.0, 1.0);
  InjectionDerivatives d;
  // dS/dVa = j diag(V) conj(diag(Ibus) - Y diag(V))
  ComplexMatrix m = -(y.y * v.asDiagonal());
  m.diagonal() += ibus;
  d.d_angle = j * (v.asDiagonal() * m.conjugate());
  // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(Ibus)) diag(V/|V|)
  d.d_mag = v.asDiagonal() * (y.y * v_unit.asDiagonal()).conjugate();
  d.d_mag.diagonal() += ibus.conjugate().cwiseProduct(v_unit);
  return d;
}

namespace {

ComplexVector to_complex(const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_angle) {
  ComplexVector v(v_mag.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::polar(v_mag(i), v_angle(i));
  return v;
}

}  // namespace

Eigen::MatrixXd build_jacobian(const Network& net, const AdmittanceMatrix& y,
                               const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_angle) {
  const BusIndexing idx(net);
  const auto d = injection_derivatives(y, to_complex(v_mag, v_angle));
  const auto np = static_cast<Eigen::Index>(idx.non_slack.size());
  const auto nq = static_cast<Eigen::Index>(idx.pq.size());
  Eigen::MatrixXd jac(np + nq, np + nq);
  for (Eigen::Index r = 0; r < np; ++r) {
    const auto i = idx.non_slack[r];
    for (Eigen::Index c = 0; c < np; ++c) jac(r, c) = -d.d_angle(i, idx.non_slack[c]).real();
    for (Eigen::Index c = 0; c < nq; ++c) jac(r, np + c) = -d.d_mag(i, idx.pq[c]).real();
  }
  for (Eigen::Index r = 0; r < nq; ++r) {
    const auto i = idx.pq[r];
    for (Eigen::Index c = 0; c < np; ++c) jac(np + r, c) = -d.d_angle(i, idx.non_slack[c]).imag();
    for (Eigen::Index c = 0; c < nq; ++c) jac(np + r, np + c) = -d.d_mag(i, idx.pq[c]).imag();
  }
  return jac;
}

BranchFlows compute_line_flows(const Network& net, const Eigen::VectorXd& v_mag,
                               const Eigen::VectorXd& v_angle) {
  const auto nb = static_cast<Eigen::Index>(net.branches.size());
  BranchFlows out{ComplexVector(nb), ComplexVector(nb), ComplexVector(nb), ComplexVector(nb),
                  Eigen::VectorXd(nb)};
  for (Eigen::Index k = 0; k < nb; ++k) {
    const auto& br = net.branches[k];
    const auto f = static_cast<Eigen::Index>(net.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(br.to_bus));
    const Complex vf = std::polar(v_mag(f), v_angle(f));
    const Complex vt = std::polar(v_mag(t), v_angle(t));
    const auto a = branch_admittance(br);
    out.current_from(k) = a.ff * vf + a.ft * vt;
    out.current_to(k) = a.tf * vf + a.tt * vt;
    out.s_from(k) = vf * std::conj(out.current_from(k));
    out.s_to(k) = vt * std::conj(out.current_to(k));
    out.flow(k) = std::max(std::abs(out.s_from(k)), std::abs(out.s_to(k)));
  }
  return out;
}

void flat_start(const Network& net, Eigen::VectorXd& v_mag, Eigen::VectorXd& v_angle) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  v_mag.resize(n);
  v_angle = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bus = net.buses[i];
    v_mag(i) = bus.kind == BusKind::Load ? 1.0 : bus.v_mag;
  }
  for (const auto& g : net.generators) {
    v_mag(static_cast<Eigen::Index>(net.bus_index(g.bus))) = g.v_setpoint;
  }
}

PowerFlowSolution solve_newton_raphson(const Network& net,
                                       const std::optional<PowerFlowSolution>& init,
                                       const PowerFlowOptions& opts) {
  return solve_newton_raphson(net, build_admittance(net), init, opts);
}

PowerFlowSolution solve_newton_raphson(const Network& net, const AdmittanceMatrix& y,
                                       const std::optional<PowerFlowSolution>& init,
                                       const PowerFlowOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("power flow tolerance must be positive");
  const BusIndexing idx(net);
  PowerFlowSolution sol;
  flat_start(net, sol.v_mag, sol.v_angle);
  if (init) {
    // Controlled magnitudes always come from the setpoints.
    for (auto i : idx.pq) sol.v_mag(i) = init->v_mag(i);
    sol.v_angle = init->v_angle;
    sol.v_angle.array() -= init->v_angle(idx.slack);
  }

  const auto np = static_cast<Eigen::Index>(idx.non_slack.size());
  const auto nq = static_cast<Eigen::Index>(idx.pq.size());
  bool converged = false;
  double norm = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    const Eigen::VectorXd f = compute_mismatch(net, y, sol.v_mag, sol.v_angle);
    norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    sol.mismatch_history.push_back(norm);
    sol.iterations = iter;
    if (!std::isfinite(norm)) {
      throw PowerFlowError(PowerFlowError::Kind::Divergence, norm, "power flow diverged");
    }
    if (norm <= opts.tol) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd jac = build_jacobian(net, y, sol.v_mag, sol.v_angle);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!(lu.rcond() > 1e-14)) {
      throw PowerFlowError(PowerFlowError::Kind::Divergence, norm,
                           "singular power-flow Jacobian");
    }
    const Eigen::VectorXd dx = lu.solve(f);
    for (Eigen::Index k = 0; k < np; ++k) sol.v_angle(idx.non_slack[k]) -= dx(k);
    for (Eigen::Index k = 0; k < nq; ++k) sol.v_mag(idx.pq[k]) -= dx(np + k);
  }
  if (!converged) {
    throw PowerFlowError(PowerFlowError::Kind::NonConvergence, norm,
                         "power flow did not converge in " + std::to_string(opts.max_iter) +
                             " iterations (mismatch " + std::to_string(norm) + ")");
  }
  sol.max_mismatch = norm;

  const ComplexVector s = bus_injection<double>(y.y, sol.v_mag, sol.v_angle);
  sol.p_injection = s.real();
  sol.q_injection = s.imag();

  const auto sched = scheduled_injection(net);
  sol.gen_p.resize(static_cast<Eigen::Index>(net.generators.size()));
  sol.gen_q.resize(sol.gen_p.size());
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    const auto i = static_cast<Eigen::Index>(net.bus_index(gen.bus));
    const auto gk = static_cast<Eigen::Index>(g);
    // Calculated injection minus the non-generator part of the schedule.
    sol.gen_q(gk) = sol.q_injection(i) - (sched.q(i) - gen.q_out);
    sol.gen_p(gk) = i == idx.slack ? sol.p_injection(i) - (sched.p(i) - gen.p_out) : gen.p_out;
    if (i == idx.slack) sol.slack_p = sol.gen_p(gk);
  }

  const auto flows = compute_line_flows(net, sol.v_mag, sol.v_angle);
  sol.branch_current = flows.current_from;
  sol.branch_flow_mva = flows.flow;
  sol.s_from = flows.s_from;
  sol.s_to = flows.s_to;
  return sol;
}

ViolationReport check_violations(const Network& net, const PowerFlowSolution& sol, double tolerance) {
  ViolationReport rep;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const auto& bus = net.buses[i];
    if (bus.kind != BusKind::Load) continue;
    const double v = sol.v_mag(static_cast<Eigen::Index>(i));
    if (v < bus.v_min - tolerance) rep.voltage.push_back({bus.id, v, bus.v_min, Bound::Lower});
    else if (v > bus.v_max + tolerance) rep.voltage.push_back({bus.id, v, bus.v_max, Bound::Upper});
  }
  const auto slack = net.slack_index();
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    const double q = sol.gen_q(static_cast<Eigen::Index>(g));
    if (q < gen.q_min - tolerance) rep.reactive.push_back({g, gen.bus, q, gen.q_min, Bound::Lower});
    else if (q > gen.q_max + tolerance) rep.reactive.push_back({g, gen.bus, q, gen.q_max, Bound::Upper});
    if (net.bus_index(gen.bus) == slack) {
      if (sol.slack_p < gen.p_min - tolerance) rep.slack_p = SlackViolation{sol.slack_p, gen.p_min, Bound::Lower};
      else if (sol.slack_p > gen.p_max + tolerance) rep.slack_p = SlackViolation{sol.slack_p, gen.p_max, Bound::Upper};
    }
  }
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    const double flow = sol.branch_flow_mva(static_cast<Eigen::Index>(k));
    if (flow > br.s_rating + tolerance) rep.line.push_back({k, br.from_bus, br.to_bus, flow, br.s_rating});
  }
  return rep;
}

}  // namespace psopf
