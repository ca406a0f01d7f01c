#pragma once

// Optimal power flow by particle swarm: each particle is a vector of control
// settings, scored by fuel cost plus quadratic penalties on the state limits
// reached after a Newton-Raphson solve.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psopf/netmodel.hpp"
#include "psopf/powerflow.hpp"
#include "psopf/pso.hpp"
#include "psopf/sensitivity.hpp"

namespace psopf {

enum class ControlKind { GenP, GenVoltage, Tap, Shunt };

/// One controllable quantity. `element` indexes generators, branches or
/// shunts depending on `kind`.
struct ControlId {
  ControlKind kind = ControlKind::GenP;
  std::size_t element = 0;

  bool operator==(const ControlId&) const = default;
};

/// "PG2", "VG1", "T6-9", "QC10".
std::string control_name(const Network& net, const ControlId& id);
ControlId parse_control_name(const Network& net, const std::string& name);

struct ControlSet {
  std::vector<ControlId> active;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t size() const noexcept { return active.size(); }
  std::vector<std::string> names(const Network& net) const;
};

/// Build a control set from ids; bounds come from the network limits.
/// Rejects duplicates and the slack generator's real power.
ControlSet make_control_set(const Network& net, const std::vector<ControlId>& ids);

/// Every P_G (non-slack), V_G, tap and shunt.
ControlSet full_controls(const Network& net);

/// All non-slack P_G plus V_G at `voltage_buses` (every generator bus when empty).
ControlSet pg_vg_controls(const Network& net, const std::vector<int>& voltage_buses = {});

/// "full", "pg", "pg+vg", "pg+vg:1,2,5,8" or a comma list of control names.
ControlSet parse_control_spec(const Network& net, const std::string& spec);

/// Current network values of the controls in `cs`.
Eigen::VectorXd control_values(const Network& net, const ControlSet& cs);

/// Copy of `net` with the controls in `cs` set to `values`.
Network apply_controls(const Network& net, const ControlSet& cs, const Eigen::VectorXd& values);

/// Sum of a + b P + c P^2 with P in MW; `p_outputs` is per-unit, one per generator.
double fuel_cost(const Network& net, const Eigen::VectorXd& p_outputs);

struct PenaltyConfig {
  double lambda = 1e6;
  double lambda_p = 1.0;
  double lambda_v = 1.0;
  double lambda_q = 1.0;
  double lambda_s = 1.0;

  void validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("penalty factor must be positive");
  }
};

/// lambda times the weighted sum of squared limit excursions (per-unit).
double penalty_value(const ViolationReport& violations, const PenaltyConfig& penalty);

/// Fuel cost plus penalty after a power-flow solve of the controlled network;
/// +infinity when the power flow fails.
double evaluate_particle(const Network& net, const ControlSet& cs, const Eigen::VectorXd& values,
                         const PenaltyConfig& penalty);

/// Limit excursions up to this size (per-unit) are not reported at an
/// optimum; the penalty still sees them.
inline constexpr double kReportTolerance = 1e-4;

struct OpfResult {
  double best_cost = 0.0;       // $/hr, fuel only
  double penalized_best = 0.0;  // $/hr, objective value at the optimum
  ControlSet control_set;
  Eigen::VectorXd controls;
  Network network;  // controlled network at the optimum
  PowerFlowSolution solution;
  ViolationReport violations;
  std::vector<double> trace;
  int iterations = 0;
  Termination terminated_by = Termination::IterMax;
};

class InfeasibleControlSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

OpfResult solve_opf(const Network& net, const ControlSet& cs, const PenaltyConfig& penalty,
                    const PsoConfig& pso_cfg, const std::vector<Eigen::VectorXd>& seeds = {});

struct AutoSelectOptions {
  int per_quantity = 2;   // top controls each violated quantity must have
  int max_controls = 0;   // cap on ranked controls taken; 0 means no cap
};

/// P_G plus the shortest prefix of the aggregate ranking that contains the
/// top `per_quantity` controls of every violated bus voltage and branch.
ControlSet auto_select_controls(const Network& net, const ControlRanking& ranking,
                                const AutoSelectOptions& opts = {});

struct SweepOptions {
  std::optional<ControlSet> fixed_controls;  // used at every level when set
  bool auto_select = false;
  AutoSelectOptions auto_options;
};

struct SweepLevel {
  double level_mw = 0.0;
  ControlSet control_set;
  ViolationReport violations_before;   // warm-start state at this level
  ViolationReport violations_initial;  // initial operating point scaled to this level
  bool pre_solved = false;  // warm-start power flow converged
  std::optional<OpfResult> result;
  std::string error;
};

/// Solve the OPF at each loading level in order. Each level starts from the
/// previous optimum: its controls set the warm network and one particle is
/// seeded there. Per-level failures are recorded and the sweep continues.
std::vector<SweepLevel> loading_sweep(const Network& net, const std::vector<double>& levels_mw,
                                      const SweepOptions& options, const PenaltyConfig& penalty,
                                      const PsoConfig& pso_cfg);

}  // namespace psopf
