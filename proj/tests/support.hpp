#pragma once

#include <string>

#include "psopf/netmodel.hpp"

namespace psopf::testing {

inline std::string case_path() { return std::string(PSOPF_DATA_DIR) + "/ieee30.case"; }

inline Network ieee30() { return load_case_file(case_path()); }

// Slack bus 1 feeding a load at bus 2 over one line.
inline Network two_bus(double r, double x, double b_total, double p_load, double q_load) {
  Network net;
  net.base_mva = 100.0;
  net.buses.push_back({1, BusKind::Slack, 0.0, 0.0, 1.0, 0.0, 0.9, 1.1});
  net.buses.push_back({2, BusKind::Load, p_load, q_load, 1.0, 0.0, 0.9, 1.1});
  net.branches.push_back({1, 2, r, x, b_total, 1.0, std::nullopt, 2.0});
  net.generators.push_back({1, 0.0, 0.0, 0.0, 5.0, -5.0, 5.0, 1.0, 0.0, 10.0, 0.01});
  return net;
}

}  // namespace psopf::testing
