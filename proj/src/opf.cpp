#include "psopf/opf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace psopf {

std::string control_name(const Network& net, const ControlId& id) {
  switch (id.kind) {
    case ControlKind::GenP: return "PG" + std::to_string(net.generators.at(id.element).bus);
    case ControlKind::GenVoltage: return "VG" + std::to_string(net.generators.at(id.element).bus);
    case ControlKind::Tap: {
      const auto& br = net.branches.at(id.element);
      return "T" + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    }
    case ControlKind::Shunt: return "QC" + std::to_string(net.shunts.at(id.element).bus);
  }
  return {};
}

namespace {

int parse_int(const std::string& s, const std::string& whole) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("malformed control name '" + whole + "'");
  return v;
}

std::size_t generator_on_bus(const Network& net, int bus, const std::string& whole) {
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    if (net.generators[g].bus == bus) return g;
  }
  throw std::invalid_argument("control '" + whole + "': no generator at bus " + std::to_string(bus));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ControlId parse_control_name(const Network& net, const std::string& name) {
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  if (starts("PG")) return {ControlKind::GenP, generator_on_bus(net, parse_int(name.substr(2), name), name)};
  if (starts("VG")) return {ControlKind::GenVoltage, generator_on_bus(net, parse_int(name.substr(2), name), name)};
  if (starts("QC")) {
    const int bus = parse_int(name.substr(2), name);
    for (std::size_t k = 0; k < net.shunts.size(); ++k) {
      if (net.shunts[k].bus == bus) return {ControlKind::Shunt, k};
    }
    throw std::invalid_argument("control '" + name + "': no shunt compensator at bus " + std::to_string(bus));
  }
  if (starts("T")) {
    const auto dash = name.find('-');
    if (dash == std::string::npos) throw std::invalid_argument("malformed control name '" + name + "'");
    const int f = parse_int(name.substr(1, dash - 1), name);
    const int t = parse_int(name.substr(dash + 1), name);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
      const auto& br = net.branches[k];
      if (br.is_transformer() && br.from_bus == f && br.to_bus == t) return {ControlKind::Tap, k};
    }
    throw std::invalid_argument("control '" + name + "': no regulating transformer on that branch");
  }
  throw std::invalid_argument("unknown control '" + name + "'");
}

std::vector<std::string> ControlSet::names(const Network& net) const {
  std::vector<std::string> out;
  out.reserve(active.size());
  for (const auto& id : active) out.push_back(control_name(net, id));
  return out;
}

ControlSet make_control_set(const Network& net, const std::vector<ControlId>& ids) {
  ControlSet cs;
  cs.active = ids;
  const auto m = static_cast<Eigen::Index>(ids.size());
  cs.lower.resize(m);
  cs.upper.resize(m);
  const auto slack_bus = net.buses[net.slack_index()].id;
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& id = ids[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < k; ++j) {
      if (ids[static_cast<std::size_t>(j)] == id) {
        throw std::invalid_argument("duplicate control " + control_name(net, id));
      }
    }
    switch (id.kind) {
      case ControlKind::GenP: {
        const auto& g = net.generators.at(id.element);
        if (g.bus == slack_bus) throw std::invalid_argument("slack generator output is not a control");
        cs.lower(k) = g.p_min;
        cs.upper(k) = g.p_max;
        break;
      }
      case ControlKind::GenVoltage: {
        const auto& bus = net.buses[net.bus_index(net.generators.at(id.element).bus)];
        cs.lower(k) = bus.v_min;
        cs.upper(k) = bus.v_max;
        break;
      }
      case ControlKind::Tap: {
        const auto& br = net.branches.at(id.element);
        if (!br.tap) throw std::invalid_argument("branch has no adjustable tap");
        cs.lower(k) = br.tap->min;
        cs.upper(k) = br.tap->max;
        break;
      }
      case ControlKind::Shunt: {
        const auto& s = net.shunts.at(id.element);
        cs.lower(k) = s.q_min;
        cs.upper(k) = s.q_max;
        break;
      }
    }
  }
  return cs;
}

ControlSet full_controls(const Network& net) {
  const auto slack_bus = net.buses[net.slack_index()].id;
  std::vector<ControlId> ids;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    if (net.generators[g].bus != slack_bus) ids.push_back({ControlKind::GenP, g});
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) ids.push_back({ControlKind::GenVoltage, g});
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    if (net.branches[k].is_transformer()) ids.push_back({ControlKind::Tap, k});
  }
  for (std::size_t k = 0; k < net.shunts.size(); ++k) ids.push_back({ControlKind::Shunt, k});
  return make_control_set(net, ids);
}

ControlSet pg_vg_controls(const Network& net, const std::vector<int>& voltage_buses) {
  const auto slack_bus = net.buses[net.slack_index()].id;
  std::vector<ControlId> ids;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    if (net.generators[g].bus != slack_bus) ids.push_back({ControlKind::GenP, g});
  }
  if (voltage_buses.empty()) {
    for (std::size_t g = 0; g < net.generators.size(); ++g) ids.push_back({ControlKind::GenVoltage, g});
  } else {
    for (int bus : voltage_buses) {
      ids.push_back({ControlKind::GenVoltage, generator_on_bus(net, bus, "VG" + std::to_string(bus))});
    }
  }
  return make_control_set(net, ids);
}

ControlSet parse_control_spec(const Network& net, const std::string& spec) {
  if (spec == "full") return full_controls(net);
  if (spec == "pg+vg") return pg_vg_controls(net);
  if (spec == "pg") {
    auto cs = pg_vg_controls(net);
    std::vector<ControlId> ids;
    for (const auto& id : cs.active) {
      if (id.kind == ControlKind::GenP) ids.push_back(id);
    }
    return make_control_set(net, ids);
  }
  if (spec.rfind("pg+vg:", 0) == 0) {
    std::vector<int> buses;
    for (const auto& tok : split(spec.substr(6), ',')) buses.push_back(parse_int(tok, spec));
    if (buses.empty()) throw std::invalid_argument("control spec '" + spec + "' lists no buses");
    return pg_vg_controls(net, buses);
  }
  std::vector<ControlId> ids;
  for (const auto& tok : split(spec, ',')) ids.push_back(parse_control_name(net, tok));
  if (ids.empty()) throw std::invalid_argument("empty control spec");
  return make_control_set(net, ids);
}

Eigen::VectorXd control_values(const Network& net, const ControlSet& cs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(cs.size()));
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const auto& id = cs.active[k];
    double x = 0.0;
    switch (id.kind) {
      case ControlKind::GenP: x = net.generators[id.element].p_out; break;
      case ControlKind::GenVoltage: x = net.generators[id.element].v_setpoint; break;
      case ControlKind::Tap: x = net.branches[id.element].tap_ratio; break;
      case ControlKind::Shunt: x = net.shunts[id.element].q_injection; break;
    }
    v(static_cast<Eigen::Index>(k)) = x;
  }
  return v;
}

Network apply_controls(const Network& net, const ControlSet& cs, const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != cs.size()) {
    throw std::invalid_argument("control vector has " + std::to_string(values.size()) +
                                " entries, control set has " + std::to_string(cs.size()));
  }
  Network out = net;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const auto& id = cs.active[k];
    const double x = values(static_cast<Eigen::Index>(k));
    switch (id.kind) {
      case ControlKind::GenP: out.generators[id.element].p_out = x; break;
      case ControlKind::GenVoltage: {
        auto& g = out.generators[id.element];
        g.v_setpoint = x;
        out.buses[out.bus_index(g.bus)].v_mag = x;
        break;
      }
      case ControlKind::Tap: out.branches[id.element].tap_ratio = x; break;
      case ControlKind::Shunt: out.shunts[id.element].q_injection = x; break;
    }
  }
  return out;
}

double fuel_cost(const Network& net, const Eigen::VectorXd& p_outputs) {
  if (static_cast<std::size_t>(p_outputs.size()) != net.generators.size()) {
    throw std::invalid_argument("one real-power output per generator expected");
  }
  double total = 0.0;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    const double mw = p_outputs(static_cast<Eigen::Index>(g)) * net.base_mva;
    total += gen.cost_a + gen.cost_b * mw + gen.cost_c * mw * mw;
  }
  return total;
}

double penalty_value(const ViolationReport& violations, const PenaltyConfig& penalty) {
  auto sq = [](double a, double b) { return (a - b) * (a - b); };
  double sum = 0.0;
  if (violations.slack_p) sum += penalty.lambda_p * sq(violations.slack_p->value, violations.slack_p->limit);
  for (const auto& v : violations.voltage) sum += penalty.lambda_v * sq(v.value, v.limit);
  for (const auto& q : violations.reactive) sum += penalty.lambda_q * sq(q.value, q.limit);
  for (const auto& l : violations.line) sum += penalty.lambda_s * sq(l.flow, l.rating);
  return penalty.lambda * sum;
}

double evaluate_particle(const Network& net, const ControlSet& cs, const Eigen::VectorXd& values,
                         const PenaltyConfig& penalty) {
  const Network controlled = apply_controls(net, cs, values);
  try {
    const auto sol = solve_newton_raphson(controlled);
    return fuel_cost(controlled, sol.gen_p) + penalty_value(check_violations(controlled, sol), penalty);
  } catch (const PowerFlowError&) {
    return std::numeric_limits<double>::infinity();
  }
}

OpfResult solve_opf(const Network& net, const ControlSet& cs, const PenaltyConfig& penalty,
                    const PsoConfig& pso_cfg, const std::vector<Eigen::VectorXd>& seeds) {
  penalty.validate();
  if (cs.size() == 0) throw std::invalid_argument("control set is empty");
  const Bounds<double> bounds{cs.lower, cs.upper};
  auto objective = [&](const Eigen::VectorXd& x) { return evaluate_particle(net, cs, x, penalty); };
  const auto pso = run<double>(objective, bounds, pso_cfg, seeds);
  if (!std::isfinite(pso.gbest_value)) {
    throw InfeasibleControlSet("no particle produced a converged power flow; control set is infeasible");
  }

  OpfResult out;
  out.control_set = cs;
  out.controls = pso.gbest_position;
  out.network = apply_controls(net, cs, out.controls);
  out.solution = solve_newton_raphson(out.network);
  out.violations = check_violations(out.network, out.solution, kReportTolerance);
  out.best_cost = fuel_cost(out.network, out.solution.gen_p);
  out.penalized_best = pso.gbest_value;
  out.trace = pso.trace;
  out.iterations = pso.iterations_run;
  out.terminated_by = pso.terminated_by;
  return out;
}

ControlSet auto_select_controls(const Network& net, const ControlRanking& ranking,
                                const AutoSelectOptions& opts) {
  auto base = pg_vg_controls(net);
  std::vector<ControlId> ids;
  for (const auto& id : base.active) {
    if (id.kind == ControlKind::GenP) ids.push_back(id);
  }

  std::set<std::string> required;
  for (const auto& q : ranking.per_quantity) {
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(opts.per_quantity, 0)),
                                            q.controls.size());
    for (std::size_t k = 0; k < take; ++k) required.insert(q.controls[k].control);
  }
  std::size_t taken = 0;
  for (const auto& rc : ranking.aggregate) {
    if (required.empty()) break;
    if (opts.max_controls > 0 && taken >= static_cast<std::size_t>(opts.max_controls)) break;
    const auto id = parse_control_name(net, rc.control);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    required.erase(rc.control);
    ++taken;
  }
  return make_control_set(net, ids);
}

std::vector<SweepLevel> loading_sweep(const Network& net, const std::vector<double>& levels_mw,
                                      const SweepOptions& options, const PenaltyConfig& penalty,
                                      const PsoConfig& pso_cfg) {
  if (!std::is_sorted(levels_mw.begin(), levels_mw.end())) {
    throw std::invalid_argument("loading levels must be sorted ascending");
  }
  std::vector<SweepLevel> out;
  Network warm = net;  // carries the previous optimum's controls
  bool have_previous = false;

  for (double level : levels_mw) {
    SweepLevel lv;
    lv.level_mw = level;
    try {
      const Network initial = scale_load(net, level);
      try {
        lv.violations_initial = check_violations(initial, solve_newton_raphson(initial));
      } catch (const PowerFlowError&) {
      }
      const Network scaled = scale_load(warm, level);
      std::optional<OperatingPoint> op;
      try {
        op = OperatingPoint{scaled, solve_newton_raphson(scaled)};
        lv.violations_before = check_violations(scaled, op->solution);
        lv.pre_solved = true;
      } catch (const PowerFlowError&) {
        lv.pre_solved = false;
      }

      if (options.fixed_controls) {
        lv.control_set = *options.fixed_controls;
      } else if (options.auto_select && op) {
        const auto s = voltage_sensitivity(*op);
        const auto r = current_sensitivity(*op);
        const auto ranking = rank_controls(s, r, lv.violations_before, scaled, default_candidates(s));
        lv.control_set = auto_select_controls(scaled, ranking, options.auto_options);
      } else {
        lv.control_set = full_controls(scaled);
      }

      std::vector<Eigen::VectorXd> seeds;
      if (have_previous) seeds.push_back(control_values(scaled, lv.control_set));
      auto result = solve_opf(scaled, lv.control_set, penalty, pso_cfg, seeds);
      warm = result.network;
      have_previous = true;
      lv.result = std::move(result);
    } catch (const std::exception& e) {
      lv.error = e.what();
    }
    out.push_back(std::move(lv));
  }
  return out;
}

}  // namespace psopf
