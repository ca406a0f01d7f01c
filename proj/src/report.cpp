#include "psopf/report.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace psopf {

std::string format_fixed(double v, int decimals) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

namespace {

const char* bound_name(Bound b) { return b == Bound::Lower ? "lower" : "upper"; }

std::string quantity_list(const ViolationReport& rep) {
  std::string out;
  auto add = [&](const std::string& s) {
    if (!out.empty()) out += ' ';
    out += s;
  };
  for (const auto& v : rep.voltage) add("V" + std::to_string(v.bus));
  for (const auto& q : rep.reactive) add("QG" + std::to_string(q.bus));
  for (const auto& l : rep.line) add("S" + std::to_string(l.from_bus) + "-" + std::to_string(l.to_bus));
  if (rep.slack_p) add("Psl");
  return out;
}

template <typename Vec>
Json vector_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

std::vector<std::string> label_names(const std::vector<VariableLabel>& labels) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(l.name);
  return out;
}

Json violations_json(const ViolationReport& rep) {
  Json j;
  j["count"] = rep.count();
  j["voltage"] = Json::array();
  for (const auto& v : rep.voltage) {
    j["voltage"].push_back({{"bus", v.bus}, {"value", v.value}, {"limit", v.limit}, {"bound", bound_name(v.bound)}});
  }
  j["reactive"] = Json::array();
  for (const auto& q : rep.reactive) {
    j["reactive"].push_back({{"generator_bus", q.bus}, {"value", q.value}, {"limit", q.limit},
                             {"bound", bound_name(q.bound)}});
  }
  j["line"] = Json::array();
  for (const auto& l : rep.line) {
    j["line"].push_back({{"branch", l.branch}, {"from_bus", l.from_bus}, {"to_bus", l.to_bus},
                         {"flow", l.flow}, {"rating", l.rating}});
  }
  if (rep.slack_p) {
    j["slack_p"] = {{"value", rep.slack_p->value}, {"limit", rep.slack_p->limit},
                    {"bound", bound_name(rep.slack_p->bound)}};
  } else {
    j["slack_p"] = nullptr;
  }
  return j;
}

Json solution_json(const Network& net, const PowerFlowSolution& sol) {
  Json j;
  j["base_mva"] = net.base_mva;
  j["iterations"] = sol.iterations;
  j["max_mismatch"] = sol.max_mismatch;
  j["mismatch_history"] = sol.mismatch_history;
  j["slack_p"] = sol.slack_p;
  Json buses = Json::array();
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    buses.push_back({{"id", net.buses[i].id},
                     {"v_mag", sol.v_mag(k)},
                     {"v_angle", sol.v_angle(k)},
                     {"p_injection", sol.p_injection(k)},
                     {"q_injection", sol.q_injection(k)}});
  }
  j["buses"] = buses;
  Json gens = Json::array();
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto k = static_cast<Eigen::Index>(g);
    gens.push_back({{"bus", net.generators[g].bus}, {"p", sol.gen_p(k)}, {"q", sol.gen_q(k)}});
  }
  j["generators"] = gens;
  Json branches = Json::array();
  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    const auto k = static_cast<Eigen::Index>(b);
    const auto& br = net.branches[b];
    branches.push_back({{"from_bus", br.from_bus},
                        {"to_bus", br.to_bus},
                        {"current_re", sol.branch_current(k).real()},
                        {"current_im", sol.branch_current(k).imag()},
                        {"flow", sol.branch_flow_mva(k)},
                        {"rating", br.s_rating}});
  }
  j["branches"] = branches;
  return j;
}

Json labelled_matrix_json(const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                          const std::vector<std::string>& cols) {
  Json j;
  j["rows"] = rows;
  j["cols"] = cols;
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    data.push_back(std::move(row));
  }
  j["data"] = std::move(data);
  return j;
}

Json ranking_json(const ControlRanking& ranking) {
  auto list = [](const std::vector<RankedControl>& v) {
    Json a = Json::array();
    for (const auto& rc : v) a.push_back({{"control", rc.control}, {"magnitude", rc.magnitude}, {"value", rc.value}});
    return a;
  };
  Json j;
  j["per_quantity"] = Json::array();
  for (const auto& q : ranking.per_quantity) {
    j["per_quantity"].push_back({{"quantity", q.quantity}, {"controls", list(q.controls)}});
  }
  j["aggregate"] = list(ranking.aggregate);
  return j;
}

Json sensitivity_json(const Network& net, const VoltageSensitivity& s, const CurrentSensitivity& r,
                      const Eigen::MatrixXd& current_per_ctrl, const ControlRanking& ranking) {
  std::vector<std::string> bus_cols;
  for (const auto& b : net.buses) bus_cols.push_back("V" + std::to_string(b.id));
  for (const auto& b : net.buses) bus_cols.push_back("d" + std::to_string(b.id));
  std::vector<std::string> branch_rows;
  for (const auto& br : net.branches) {
    branch_rows.push_back("I" + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus));
  }
  const auto cols = label_names(s.col_labels);

  Json j;
  j["su"] = labelled_matrix_json(s.matrix, label_names(s.row_labels), cols);
  std::vector<std::string> masked;
  for (std::size_t k = 0; k < s.masked.size(); ++k) {
    if (s.masked[k]) masked.push_back(cols[k]);
  }
  j["su"]["masked_columns"] = masked;
  j["r"] = labelled_matrix_json(r.matrix, branch_rows, bus_cols);
  std::vector<std::string> squared;
  for (std::size_t k = 0; k < r.squared.size(); ++k) {
    if (r.squared[k]) squared.push_back(branch_rows[k]);
  }
  j["r"]["squared_rows"] = squared;
  j["current_per_control"] = labelled_matrix_json(current_per_ctrl, branch_rows, cols);
  j["ranking"] = ranking_json(ranking);
  return j;
}

Json opf_json(const OpfResult& res) {
  const auto& net = res.network;
  Json j;
  j["best_cost"] = res.best_cost;
  j["penalized_best"] = res.penalized_best;
  j["iterations"] = res.iterations;
  j["terminated_by"] = res.terminated_by == Termination::Stagnation ? "stagnation" : "iter_max";
  Json controls = Json::array();
  const auto names = res.control_set.names(net);
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    controls.push_back({{"control", names[k]},
                        {"value", res.controls(i)},
                        {"lower", res.control_set.lower(i)},
                        {"upper", res.control_set.upper(i)}});
  }
  j["controls"] = controls;
  Json gens = Json::array();
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto k = static_cast<Eigen::Index>(g);
    gens.push_back({{"bus", net.generators[g].bus},
                    {"p_mw", res.solution.gen_p(k) * net.base_mva},
                    {"q_mvar", res.solution.gen_q(k) * net.base_mva}});
  }
  j["generators"] = gens;
  j["violations"] = violations_json(res.violations);
  j["solution"] = solution_json(net, res.solution);
  j["trace"] = res.trace;
  return j;
}

std::string bus_voltage_csv(const Network& net, const PowerFlowSolution& sol) {
  std::ostringstream out;
  out << "bus,kind,v_mag,v_angle_deg,v_min,v_max,status\n";
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const auto& b = net.buses[i];
    const auto k = static_cast<Eigen::Index>(i);
    const double v = sol.v_mag(k);
    const char* kind = b.kind == BusKind::Slack ? "slack" : b.kind == BusKind::Generator ? "pv" : "pq";
    const char* status = b.kind != BusKind::Load ? "control" : v < b.v_min ? "low" : v > b.v_max ? "high" : "ok";
    out << b.id << ',' << kind << ',' << format_fixed(v, 6) << ','
        << format_fixed(sol.v_angle(k) * 180.0 / std::numbers::pi, 6) << ',' << format_fixed(b.v_min, 4) << ','
        << format_fixed(b.v_max, 4) << ',' << status << '\n';
  }
  return out.str();
}

std::string trace_csv(const std::vector<double>& trace) {
  std::ostringstream out;
  out << "iteration,gbest_value\n";
  for (std::size_t k = 0; k < trace.size(); ++k) out << k + 1 << ',' << format_fixed(trace[k], 5) << '\n';
  return out.str();
}

std::string sparsity_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                         const std::vector<std::string>& cols, double threshold) {
  std::ostringstream out;
  out << "row,col,value\n";
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (std::abs(m(r, c)) > threshold) {
        std::snprintf(buf, sizeof buf, "%.10g", m(r, c));
        out << rows[static_cast<std::size_t>(r)] << ',' << cols[static_cast<std::size_t>(c)] << ',' << buf << '\n';
      }
    }
  }
  return out.str();
}

std::string opf_summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "level_mw,cost,iterations,violations\n";
  for (const auto& r : rows) {
    out << format_fixed(r.level_mw, 3) << ',' << format_fixed(r.cost, 5) << ',' << r.iterations << ','
        << r.violations << '\n';
  }
  return out.str();
}

std::string sweep_csv(const Network& net, const std::vector<SweepLevel>& levels) {
  std::ostringstream out;
  out << "level_mw,status,cost,iterations,controls,violations_initial,violations_before,violations_after,error\n";
  for (const auto& lv : levels) {
    std::string controls;
    for (const auto& n : lv.control_set.names(net)) controls += (controls.empty() ? "" : " ") + n;
    const bool ok = lv.result.has_value() && lv.error.empty();
    out << format_fixed(lv.level_mw, 3) << ',' << (ok ? "ok" : "failed") << ','
        << (ok ? format_fixed(lv.result->best_cost, 5) : "") << ',' << (ok ? std::to_string(lv.result->iterations) : "")
        << ',' << controls << ',' << quantity_list(lv.violations_initial) << ',' << quantity_list(lv.violations_before) << ','
        << (ok ? quantity_list(lv.result->violations) : "") << ',';
    std::string err = lv.error;
    for (auto& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << err << '\n';
  }
  return out.str();
}

}  // namespace psopf
