#pragma once

// Newton-Raphson AC power flow in polar coordinates, branch flows and
// operating-limit checks.

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "psopf/netmodel.hpp"

namespace psopf {

/// Bus positions grouped by role; equations and unknowns are ordered by these.
struct BusIndexing {
  Eigen::Index slack = 0;
  std::vector<Eigen::Index> pv;
  std::vector<Eigen::Index> pq;
  std::vector<Eigen::Index> non_slack;  // pv and pq merged in bus order

  explicit BusIndexing(const Network& net);
};

/// S_i = V_i * conj(sum_j Y_ij V_j) for every bus, computed in `Scalar`.
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> bus_injection(
    const Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>& y,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v_mag,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v_angle) {
  using C = std::complex<Scalar>;
  const Eigen::Index n = v_mag.size();
  Eigen::Matrix<C, Eigen::Dynamic, 1> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(v_mag(i), v_angle(i));
  const Eigen::Matrix<C, Eigen::Dynamic, 1> current = y * v;
  return v.cwiseProduct(current.conjugate());
}

/// Scheduled net injections P_G - P_D and Q_G + Q_C - Q_D per bus. Generator
/// outputs at the slack (P, Q) and PV (Q) buses are the case-file values.
struct ScheduledInjection {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};
ScheduledInjection scheduled_injection(const Network& net);

/// Residuals [dP at non-slack buses; dQ at PQ buses], dP = P_sched - P_calc.
Eigen::VectorXd compute_mismatch(const Network& net, const AdmittanceMatrix& y,
                                 const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_angle);

/// d(mismatch)/d[angles at non-slack buses; magnitudes at PQ buses].
Eigen::MatrixXd build_jacobian(const Network& net, const AdmittanceMatrix& y,
                               const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_angle);

/// Partial derivatives of the complex bus injections with respect to every
/// bus voltage angle and magnitude (N x N each).
struct InjectionDerivatives {
  ComplexMatrix d_angle;
  ComplexMatrix d_mag;
};
InjectionDerivatives injection_derivatives(const AdmittanceMatrix& y, const ComplexVector& v);

struct BranchFlows {
  ComplexVector current_from;  // terminal current leaving the from bus
  ComplexVector current_to;
  ComplexVector s_from;
  ComplexVector s_to;
  Eigen::VectorXd flow;  // |S| at the more loaded end
};

BranchFlows compute_line_flows(const Network& net, const Eigen::VectorXd& v_mag,
                               const Eigen::VectorXd& v_angle);

struct PowerFlowSolution {
  Eigen::VectorXd v_mag;
  Eigen::VectorXd v_angle;
  Eigen::VectorXd p_injection;
  Eigen::VectorXd q_injection;
  double slack_p = 0.0;
  Eigen::VectorXd gen_p;  // per generator; slack entry equals slack_p
  Eigen::VectorXd gen_q;
  ComplexVector branch_current;
  Eigen::VectorXd branch_flow_mva;
  ComplexVector s_from;
  ComplexVector s_to;
  int iterations = 0;
  double max_mismatch = 0.0;
  std::vector<double> mismatch_history;
};

class PowerFlowError : public std::runtime_error {
 public:
  enum class Kind { Divergence, NonConvergence };

  PowerFlowError(Kind kind, double last_mismatch, const std::string& what)
      : std::runtime_error(what), kind_(kind), last_mismatch_(last_mismatch) {}
  Kind kind() const noexcept { return kind_; }
  double last_mismatch() const noexcept { return last_mismatch_; }

 private:
  Kind kind_;
  double last_mismatch_;
};

struct PowerFlowOptions {
  double tol = 1e-6;
  int max_iter = 30;
};

/// Solve from `init` (voltages only are used) or from a flat start with
/// generator buses at their setpoints. `iterations` counts mismatch
/// evaluations, so a state that already satisfies the tolerance takes one.
PowerFlowSolution solve_newton_raphson(const Network& net,
                                       const std::optional<PowerFlowSolution>& init = std::nullopt,
                                       const PowerFlowOptions& opts = {});

PowerFlowSolution solve_newton_raphson(const Network& net, const AdmittanceMatrix& y,
                                       const std::optional<PowerFlowSolution>& init,
                                       const PowerFlowOptions& opts);

/// Initial voltage profile: case-file magnitudes at PQ buses, setpoints at
/// generator buses, zero angles.
void flat_start(const Network& net, Eigen::VectorXd& v_mag, Eigen::VectorXd& v_angle);

enum class Bound { Lower, Upper };

struct VoltageViolation {
  int bus = 0;
  double value = 0.0;
  double limit = 0.0;
  Bound bound = Bound::Lower;
};

struct ReactiveViolation {
  std::size_t generator = 0;
  int bus = 0;
  double value = 0.0;
  double limit = 0.0;
  Bound bound = Bound::Lower;
};

struct LineViolation {
  std::size_t branch = 0;
  int from_bus = 0;
  int to_bus = 0;
  double flow = 0.0;
  double rating = 0.0;
};

struct SlackViolation {
  double value = 0.0;
  double limit = 0.0;
  Bound bound = Bound::Lower;
};

struct ViolationReport {
  std::vector<VoltageViolation> voltage;
  std::vector<ReactiveViolation> reactive;
  std::vector<LineViolation> line;
  std::optional<SlackViolation> slack_p;

  bool empty() const noexcept {
    return voltage.empty() && reactive.empty() && line.empty() && !slack_p;
  }
  std::size_t count() const noexcept {
    return voltage.size() + reactive.size() + line.size() + (slack_p ? 1 : 0);
  }
};

/// Load-bus voltages, generator reactive outputs, slack real output and branch
/// MVA loadings checked against their limits. An excursion counts only when it
/// exceeds `tolerance` (per-unit).
ViolationReport check_violations(const Network& net, const PowerFlowSolution& sol, double tolerance = 0.0);

}  // namespace psopf
