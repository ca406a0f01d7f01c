#pragma once

// JSON and CSV renderings of solutions, sensitivity reports and OPF results.
// Costs in CSV output carry five decimals.

#include <string>
#include <vector>

#include <json.hpp>

#include "psopf/netmodel.hpp"
#include "psopf/opf.hpp"
#include "psopf/powerflow.hpp"
#include "psopf/sensitivity.hpp"

namespace psopf {

using Json = nlohmann::ordered_json;

std::string format_fixed(double v, int decimals);

Json violations_json(const ViolationReport& rep);
Json solution_json(const Network& net, const PowerFlowSolution& sol);

/// Row-major matrix with its row and column label arrays.
Json labelled_matrix_json(const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                          const std::vector<std::string>& cols);

Json ranking_json(const ControlRanking& ranking);
Json sensitivity_json(const Network& net, const VoltageSensitivity& s, const CurrentSensitivity& r,
                      const Eigen::MatrixXd& current_per_ctrl, const ControlRanking& ranking);

Json opf_json(const OpfResult& res);

/// bus,kind,v_mag,v_angle_deg,v_min,v_max,status
std::string bus_voltage_csv(const Network& net, const PowerFlowSolution& sol);

/// iteration,gbest_value
std::string trace_csv(const std::vector<double>& trace);

/// row,col,value for every |entry| above `threshold`.
std::string sparsity_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                         const std::vector<std::string>& cols, double threshold = 1e-9);

struct SummaryRow {
  double level_mw = 0.0;
  double cost = 0.0;
  int iterations = 0;
  std::size_t violations = 0;
};
/// level_mw,cost,iterations,violations
std::string opf_summary_csv(const std::vector<SummaryRow>& rows);

/// level_mw,status,cost,iterations,controls,violations_initial,violations_before,
/// violations_after,error
std::string sweep_csv(const Network& net, const std::vector<SweepLevel>& levels);

std::vector<std::string> label_names(const std::vector<VariableLabel>& labels);

}  // namespace psopf
