#pragma once

// First-order sensitivities of the power-flow state to control variables at a
// converged operating point, branch-current sensitivities, and the ranking of
// controls by their influence on violated quantities.
//
// Residuals g are the 2N bus balance equations ordered [P_1..P_N, Q_1..Q_N].
// State columns (x, 2N):   [P_sl, Q_sl, Q_G..., delta_G..., V_L..., delta_L...]
// Control columns (u, M):  [V_sl, delta_sl, P_G..., V_G..., P_L..., Q_L...,
//                           T..., Q_C...]
// The trailing tap and shunt blocks extend the classical 2N control grouping
// so those devices can be ranked alongside generator voltages.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psopf/netmodel.hpp"
#include "psopf/powerflow.hpp"

namespace psopf {

struct OperatingPoint {
  Network network;
  PowerFlowSolution solution;
};

enum class VariableKind {
  // states
  SlackP,
  SlackQ,
  GenQ,
  GenAngle,
  LoadVoltage,
  LoadAngle,
  // controls
  SlackVoltage,
  SlackAngle,
  GenP,
  GenVoltage,
  LoadP,
  LoadQ,
  Tap,
  ShuntQ,
};

struct VariableLabel {
  VariableKind kind;
  std::size_t element;  // bus position, or branch / shunt index for Tap / ShuntQ
  std::string name;
};

/// Row and column labels for the grouped state and control vectors.
struct VariableGrouping {
  std::vector<VariableLabel> states;
  std::vector<VariableLabel> controls;

  explicit VariableGrouping(const Network& net);
  Eigen::Index state_index(const std::string& name) const;
  Eigen::Index control_index(const std::string& name) const;
};

struct ResidualJacobians {
  Eigen::MatrixXd gx;  // 2N x 2N
  Eigen::MatrixXd gu;  // 2N x M
};

/// Grouped state and control values at the operating point.
Eigen::VectorXd state_values(const OperatingPoint& op, const VariableGrouping& grouping);
Eigen::VectorXd control_values(const OperatingPoint& op, const VariableGrouping& grouping);

/// Evaluate the 2N balance residuals with every grouped variable taken from
/// `x` and `u`; the remaining quantities come from `op`.
Eigen::VectorXd grouped_residual(const OperatingPoint& op, const VariableGrouping& grouping,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& u);

ResidualJacobians build_gx_gu(const OperatingPoint& op);

class SingularOperatingPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VoltageSensitivity {
  Eigen::MatrixXd matrix;  // S = -gx^-1 gu, 2N x M
  std::vector<VariableLabel> row_labels;
  std::vector<VariableLabel> col_labels;
  std::vector<bool> masked;  // reference columns (V_sl, delta_sl)

  Eigen::Index row(const std::string& name) const;
  Eigen::Index col(const std::string& name) const;
};

VoltageSensitivity voltage_sensitivity(const OperatingPoint& op);

enum class Masking { None, HoldReference };

/// Delta x = S du over the supplied labels. With HoldReference the masked
/// reference columns contribute nothing. Unknown labels throw
/// std::invalid_argument.
Eigen::VectorXd predict_state_change(const VoltageSensitivity& s,
                                     const std::map<std::string, double>& du,
                                     Masking masking = Masking::None);

/// R maps [dV_1..dV_N, ddelta_1..ddelta_N] to the change in |I| of the
/// from-end terminal current of every branch. Where |I| < 1e-9 the row holds
/// the sensitivity of |I|^2 instead.
struct CurrentSensitivity {
  Eigen::MatrixXd matrix;  // B x 2N
  std::vector<bool> squared;
};

CurrentSensitivity current_sensitivity(const OperatingPoint& op);

/// Bus voltage magnitudes and angles per unit control change (2N x M). Rows
/// of state buses come from S; directly controlled voltages and the slack
/// angle map one-to-one onto their control columns.
Eigen::MatrixXd bus_voltage_sensitivity(const VoltageSensitivity& s, const Network& net);

/// Branch-current magnitude change per unit control change (B x M).
Eigen::MatrixXd current_per_control(const VoltageSensitivity& s, const CurrentSensitivity& r,
                                    const Network& net);

struct RankedControl {
  std::string control;
  double magnitude = 0.0;
  double value = 0.0;  // signed sensitivity
};

struct QuantityRanking {
  std::string quantity;  // "V18" for bus voltages, "I1-2" for branch currents
  std::vector<RankedControl> controls;
};

struct ControlRanking {
  std::vector<QuantityRanking> per_quantity;
  std::vector<RankedControl> aggregate;  // by best per-quantity magnitude

  bool empty() const noexcept { return per_quantity.empty(); }
};

/// Generator voltages at PV buses, all transformer taps and all shunt
/// compensators; slack voltage/angle, P_G and loads are excluded.
std::vector<std::string> default_candidates(const VoltageSensitivity& s);

ControlRanking rank_controls(const VoltageSensitivity& s, const Eigen::MatrixXd& current_per_ctrl,
                             const ViolationReport& violations, const Network& net,
                             const std::vector<std::string>& candidates);

ControlRanking rank_controls(const VoltageSensitivity& s, const CurrentSensitivity& r,
                             const ViolationReport& violations, const Network& net,
                             const std::vector<std::string>& candidates);

}  // namespace psopf
