#include "psopf/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/LU>

namespace psopf {

namespace {

std::string bus_name(const Network& net, std::size_t pos) {
  return std::to_string(net.buses[pos].id);
}

std::string branch_name(const Branch& br) {
  return std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
}

Eigen::Index find_label(const std::vector<VariableLabel>& labels, const std::string& name) {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k].name == name) return static_cast<Eigen::Index>(k);
  }
  return -1;
}

ComplexVector complex_voltages(const PowerFlowSolution& sol) {
  ComplexVector v(sol.v_mag.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::polar(sol.v_mag(i), sol.v_angle(i));
  return v;
}

}  // namespace

VariableGrouping::VariableGrouping(const Network& net) {
  const BusIndexing idx(net);
  const auto sl = static_cast<std::size_t>(idx.slack);
  auto pos = [](Eigen::Index i) { return static_cast<std::size_t>(i); };

  states.push_back({VariableKind::SlackP, sl, "Psl"});
  states.push_back({VariableKind::SlackQ, sl, "Qsl"});
  for (auto i : idx.pv) states.push_back({VariableKind::GenQ, pos(i), "QG" + bus_name(net, pos(i))});
  for (auto i : idx.pv) states.push_back({VariableKind::GenAngle, pos(i), "dG" + bus_name(net, pos(i))});
  for (auto i : idx.pq) states.push_back({VariableKind::LoadVoltage, pos(i), "VL" + bus_name(net, pos(i))});
  for (auto i : idx.pq) states.push_back({VariableKind::LoadAngle, pos(i), "dL" + bus_name(net, pos(i))});

  controls.push_back({VariableKind::SlackVoltage, sl, "VG" + bus_name(net, sl)});
  controls.push_back({VariableKind::SlackAngle, sl, "Dsl" + bus_name(net, sl)});
  for (auto i : idx.pv) controls.push_back({VariableKind::GenP, pos(i), "PG" + bus_name(net, pos(i))});
  for (auto i : idx.pv) controls.push_back({VariableKind::GenVoltage, pos(i), "VG" + bus_name(net, pos(i))});
  for (auto i : idx.pq) controls.push_back({VariableKind::LoadP, pos(i), "PL" + bus_name(net, pos(i))});
  for (auto i : idx.pq) controls.push_back({VariableKind::LoadQ, pos(i), "QL" + bus_name(net, pos(i))});
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    if (net.branches[k].is_transformer()) {
      controls.push_back({VariableKind::Tap, k, "T" + branch_name(net.branches[k])});
    }
  }
  for (std::size_t k = 0; k < net.shunts.size(); ++k) {
    controls.push_back({VariableKind::ShuntQ, k, "QC" + std::to_string(net.shunts[k].bus)});
  }
}

Eigen::Index VariableGrouping::state_index(const std::string& name) const {
  const auto k = find_label(states, name);
  if (k < 0) throw std::invalid_argument("unknown state variable '" + name + "'");
  return k;
}

Eigen::Index VariableGrouping::control_index(const std::string& name) const {
  const auto k = find_label(controls, name);
  if (k < 0) throw std::invalid_argument("unknown control variable '" + name + "'");
  return k;
}

Eigen::VectorXd state_values(const OperatingPoint& op, const VariableGrouping& grouping) {
  const auto& net = op.network;
  const auto& sol = op.solution;
  Eigen::VectorXd x(static_cast<Eigen::Index>(grouping.states.size()));
  for (std::size_t k = 0; k < grouping.states.size(); ++k) {
    const auto& l = grouping.states[k];
    const auto i = static_cast<Eigen::Index>(l.element);
    double v = 0.0;
    switch (l.kind) {
      case VariableKind::SlackP: v = sol.slack_p; break;
      case VariableKind::SlackQ:
      case VariableKind::GenQ: v = sol.gen_q(net.generator_at(l.element)); break;
      case VariableKind::GenAngle:
      case VariableKind::LoadAngle: v = sol.v_angle(i); break;
      case VariableKind::LoadVoltage: v = sol.v_mag(i); break;
      default: throw std::logic_error("control label in state grouping");
    }
    x(static_cast<Eigen::Index>(k)) = v;
  }
  return x;
}

Eigen::VectorXd control_values(const OperatingPoint& op, const VariableGrouping& grouping) {
  const auto& net = op.network;
  const auto& sol = op.solution;
  Eigen::VectorXd u(static_cast<Eigen::Index>(grouping.controls.size()));
  for (std::size_t k = 0; k < grouping.controls.size(); ++k) {
    const auto& l = grouping.controls[k];
    const auto i = static_cast<Eigen::Index>(l.element);
    double v = 0.0;
    switch (l.kind) {
      case VariableKind::SlackVoltage:
      case VariableKind::GenVoltage: v = sol.v_mag(i); break;
      case VariableKind::SlackAngle: v = sol.v_angle(i); break;
      case VariableKind::GenP: v = net.generators[net.generator_at(l.element)].p_out; break;
      case VariableKind::LoadP: v = net.buses[l.element].p_demand; break;
      case VariableKind::LoadQ: v = net.buses[l.element].q_demand; break;
      case VariableKind::Tap: v = net.branches[l.element].tap_ratio; break;
      case VariableKind::ShuntQ: v = net.shunts[l.element].q_injection; break;
      default: throw std::logic_error("state label in control grouping");
    }
    u(static_cast<Eigen::Index>(k)) = v;
  }
  return u;
}

Eigen::VectorXd grouped_residual(const OperatingPoint& op, const VariableGrouping& grouping,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Network net = op.network;
  Eigen::VectorXd v_mag = op.solution.v_mag;
  Eigen::VectorXd v_angle = op.solution.v_angle;
  auto gen = [&](std::size_t bus_pos) -> Generator& { return net.generators[net.generator_at(bus_pos)]; };

  for (std::size_t k = 0; k < grouping.states.size(); ++k) {
    const auto& l = grouping.states[k];
    const double val = x(static_cast<Eigen::Index>(k));
    const auto i = static_cast<Eigen::Index>(l.element);
    switch (l.kind) {
      case VariableKind::SlackP: gen(l.element).p_out = val; break;
      case VariableKind::SlackQ:
      case VariableKind::GenQ: gen(l.element).q_out = val; break;
      case VariableKind::GenAngle:
      case VariableKind::LoadAngle: v_angle(i) = val; break;
      case VariableKind::LoadVoltage: v_mag(i) = val; break;
      default: break;
    }
  }
  for (std::size_t k = 0; k < grouping.controls.size(); ++k) {
    const auto& l = grouping.controls[k];
    const double val = u(static_cast<Eigen::Index>(k));
    const auto i = static_cast<Eigen::Index>(l.element);
    switch (l.kind) {
      case VariableKind::SlackVoltage:
      case VariableKind::GenVoltage: v_mag(i) = val; break;
      case VariableKind::SlackAngle: v_angle(i) = val; break;
      case VariableKind::GenP: gen(l.element).p_out = val; break;
      case VariableKind::LoadP: net.buses[l.element].p_demand = val; break;
      case VariableKind::LoadQ: net.buses[l.element].q_demand = val; break;
      case VariableKind::Tap: net.branches[l.element].tap_ratio = val; break;
      case VariableKind::ShuntQ: net.shunts[l.element].q_injection = val; break;
      default: break;
    }
  }

  const auto y = build_admittance(net);
  const auto sched = scheduled_injection(net);
  const ComplexVector s = bus_injection<double>(y.y, v_mag, v_angle);
  const auto n = s.size();
  Eigen::VectorXd g(2 * n);
  g.head(n) = sched.p - s.real();
  g.tail(n) = sched.q - s.imag();
  return g;
}

ResidualJacobians build_gx_gu(const OperatingPoint& op) {
  const auto& net = op.network;
  const VariableGrouping grouping(net);
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  const auto y = build_admittance(net);
  const ComplexVector v = complex_voltages(op.solution);
  const auto d = injection_derivatives(y, v);

  // Column of -dS/d(var) split into P and Q residual rows.
  auto put_voltage_column = [&](Eigen::MatrixXd& m, Eigen::Index col, const ComplexMatrix& ds,
                                Eigen::Index bus) {
    m.col(col).head(n) = -ds.col(bus).real();
    m.col(col).tail(n) = -ds.col(bus).imag();
  };

  ResidualJacobians out{Eigen::MatrixXd::Zero(2 * n, 2 * n),
                        Eigen::MatrixXd::Zero(2 * n, static_cast<Eigen::Index>(grouping.controls.size()))};

  for (std::size_t k = 0; k < grouping.states.size(); ++k) {
    const auto& l = grouping.states[k];
    const auto c = static_cast<Eigen::Index>(k);
    const auto i = static_cast<Eigen::Index>(l.element);
    switch (l.kind) {
      case VariableKind::SlackP: out.gx(i, c) = 1.0; break;
      case VariableKind::SlackQ:
      case VariableKind::GenQ: out.gx(n + i, c) = 1.0; break;
      case VariableKind::GenAngle:
      case VariableKind::LoadAngle: put_voltage_column(out.gx, c, d.d_angle, i); break;
      case VariableKind::LoadVoltage: put_voltage_column(out.gx, c, d.d_mag, i); break;
      default: break;
    }
  }

  for (std::size_t k = 0; k < grouping.controls.size(); ++k) {
    const auto& l = grouping.controls[k];
    const auto c = static_cast<Eigen::Index>(k);
    const auto i = static_cast<Eigen::Index>(l.element);
    switch (l.kind) {
      case VariableKind::SlackVoltage:
      case VariableKind::GenVoltage: put_voltage_column(out.gu, c, d.d_mag, i); break;
      case VariableKind::SlackAngle: put_voltage_column(out.gu, c, d.d_angle, i); break;
      case VariableKind::GenP: out.gu(i, c) = 1.0; break;
      case VariableKind::LoadP: out.gu(i, c) = -1.0; break;
      case VariableKind::LoadQ: out.gu(n + i, c) = -1.0; break;
      case VariableKind::ShuntQ: {
        const auto b = static_cast<Eigen::Index>(net.bus_index(net.shunts[l.element].bus));
        out.gu(n + b, c) = 1.0;
        break;
      }
      case VariableKind::Tap: {
        const auto& br = net.branches[l.element];
        const auto f = static_cast<Eigen::Index>(net.bus_index(br.from_bus));
        const auto t = static_cast<Eigen::Index>(net.bus_index(br.to_bus));
        const Complex ys = series_admittance(br);
        const Complex charging(0.0, br.b_total / 2.0);
        const double tap = br.tap_ratio;
        const Complex d_ff = -2.0 * (ys + charging) / (tap * tap * tap);
        const Complex d_ft = ys / (tap * tap);
        const Complex ds_f = v(f) * std::conj(d_ff * v(f) + d_ft * v(t));
        const Complex ds_t = v(t) * std::conj(d_ft * v(f));
        out.gu(f, c) = -ds_f.real();
        out.gu(n + f, c) = -ds_f.imag();
        out.gu(t, c) = -ds_t.real();
        out.gu(n + t, c) = -ds_t.imag();
        break;
      }
      default: break;
    }
  }
  return out;
}

Eigen::Index VoltageSensitivity::row(const std::string& name) const {
  const auto k = find_label(row_labels, name);
  if (k < 0) throw std::invalid_argument("unknown state label '" + name + "'");
  return k;
}

Eigen::Index VoltageSensitivity::col(const std::string& name) const {
  const auto k = find_label(col_labels, name);
  if (k < 0) throw std::invalid_argument("unknown control label '" + name + "'");
  return k;
}

VoltageSensitivity voltage_sensitivity(const OperatingPoint& op) {
  const VariableGrouping grouping(op.network);
  const auto jac = build_gx_gu(op);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.gx);
  if (!(lu.rcond() > 1e-12)) {
    throw SingularOperatingPoint(
        "state Jacobian gx is singular at this operating point (voltage-collapse proximity)");
  }
  VoltageSensitivity s;
  s.matrix = -lu.solve(jac.gu);
  if (!s.matrix.allFinite()) {
    throw SingularOperatingPoint("sensitivity matrix is not finite at this operating point");
  }
  s.row_labels = grouping.states;
  s.col_labels = grouping.controls;
  s.masked.resize(s.col_labels.size(), false);
  for (std::size_t k = 0; k < s.col_labels.size(); ++k) {
    const auto kind = s.col_labels[k].kind;
    s.masked[k] = kind == VariableKind::SlackVoltage || kind == VariableKind::SlackAngle;
  }
  return s;
}

Eigen::VectorXd predict_state_change(const VoltageSensitivity& s,
                                     const std::map<std::string, double>& du, Masking masking) {
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(s.matrix.rows());
  for (const auto& [name, delta] : du) {
    const auto c = s.col(name);
    if (masking == Masking::HoldReference && s.masked[static_cast<std::size_t>(c)]) continue;
    dx += delta * s.matrix.col(c);
  }
  return dx;
}

CurrentSensitivity current_sensitivity(const OperatingPoint& op) {
  const auto& net = op.network;
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  const auto nb = static_cast<Eigen::Index>(net.branches.size());
  const ComplexVector v = complex_voltages(op.solution);
  const Complex j(0.0, 1.0);
  CurrentSensitivity r{Eigen::MatrixXd::Zero(nb, 2 * n), std::vector<bool>(net.branches.size(), false)};

  for (Eigen::Index k = 0; k < nb; ++k) {
    const auto& br = net.branches[k];
    const auto f = static_cast<Eigen::Index>(net.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(br.to_bus));
    const auto a = branch_admittance(br);
    const Complex current = a.ff * v(f) + a.ft * v(t);
    // dI/d|V_b| = Y e^{j delta_b}, dI/d delta_b = j Y V_b
    const Complex di_dvf = a.ff * v(f) / std::abs(v(f));
    const Complex di_dvt = a.ft * v(t) / std::abs(v(t));
    const Complex di_daf = j * a.ff * v(f);
    const Complex di_dat = j * a.ft * v(t);

    const double mag = std::abs(current);
    const bool squared = mag < 1e-9;
    r.squared[static_cast<std::size_t>(k)] = squared;
    // d|I| = (Re I dRe + Im I dIm) / |I|; d|I|^2 = 2 (Re I dRe + Im I dIm)
    const double scale = squared ? 2.0 : 1.0 / mag;
    auto project = [&](Complex di) {
      return scale * (current.real() * di.real() + current.imag() * di.imag());
    };
    r.matrix(k, f) += project(di_dvf);
    r.matrix(k, t) += project(di_dvt);
    r.matrix(k, n + f) += project(di_daf);
    r.matrix(k, n + t) += project(di_dat);
  }
  return r;
}

Eigen::MatrixXd bus_voltage_sensitivity(const VoltageSensitivity& s, const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * n, s.matrix.cols());
  for (std::size_t k = 0; k < s.row_labels.size(); ++k) {
    const auto& l = s.row_labels[k];
    const auto i = static_cast<Eigen::Index>(l.element);
    if (l.kind == VariableKind::LoadVoltage) w.row(i) = s.matrix.row(static_cast<Eigen::Index>(k));
    if (l.kind == VariableKind::LoadAngle || l.kind == VariableKind::GenAngle) {
      w.row(n + i) = s.matrix.row(static_cast<Eigen::Index>(k));
    }
  }
  for (std::size_t k = 0; k < s.col_labels.size(); ++k) {
    const auto& l = s.col_labels[k];
    const auto i = static_cast<Eigen::Index>(l.element);
    const auto c = static_cast<Eigen::Index>(k);
    if (l.kind == VariableKind::SlackVoltage || l.kind == VariableKind::GenVoltage) w(i, c) = 1.0;
    if (l.kind == VariableKind::SlackAngle) w(n + i, c) = 1.0;
  }
  return w;
}

Eigen::MatrixXd current_per_control(const VoltageSensitivity& s, const CurrentSensitivity& r,
                                    const Network& net) {
  return r.matrix * bus_voltage_sensitivity(s, net);
}

std::vector<std::string> default_candidates(const VoltageSensitivity& s) {
  std::vector<std::string> out;
  for (const auto& l : s.col_labels) {
    if (l.kind == VariableKind::GenVoltage || l.kind == VariableKind::Tap ||
        l.kind == VariableKind::ShuntQ) {
      out.push_back(l.name);
    }
  }
  return out;
}

namespace {

std::vector<RankedControl> rank_row(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                    const std::vector<Eigen::Index>& cols,
                                    const std::vector<std::string>& names) {
  std::vector<RankedControl> out;
  out.reserve(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const double v = row(cols[k]);
    out.push_back({names[k], std::abs(v), v});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedControl& a, const RankedControl& b) { return a.magnitude > b.magnitude; });
  return out;
}

}  // namespace

ControlRanking rank_controls(const VoltageSensitivity& s, const Eigen::MatrixXd& current_per_ctrl,
                             const ViolationReport& violations, const Network& net,
                             const std::vector<std::string>& candidates) {
  ControlRanking out;
  if (violations.voltage.empty() && violations.line.empty()) return out;

  std::vector<Eigen::Index> cols;
  for (const auto& name : candidates) cols.push_back(s.col(name));

  for (const auto& vv : violations.voltage) {
    const auto bus_pos = net.bus_index(vv.bus);
    if (net.buses[bus_pos].kind != BusKind::Load) continue;
    const auto row = s.row("VL" + std::to_string(vv.bus));
    out.per_quantity.push_back({"V" + std::to_string(vv.bus), rank_row(s.matrix.row(row), cols, candidates)});
  }
  for (const auto& lv : violations.line) {
    out.per_quantity.push_back(
        {"I" + std::to_string(lv.from_bus) + "-" + std::to_string(lv.to_bus),
         rank_row(current_per_ctrl.row(static_cast<Eigen::Index>(lv.branch)), cols, candidates)});
  }

  std::map<std::string, RankedControl> best;
  for (const auto& q : out.per_quantity) {
    for (const auto& rc : q.controls) {
      auto it = best.find(rc.control);
      if (it == best.end() || rc.magnitude > it->second.magnitude) best[rc.control] = rc;
    }
  }
  for (const auto& name : candidates) {
    if (auto it = best.find(name); it != best.end()) out.aggregate.push_back(it->second);
  }
  std::stable_sort(out.aggregate.begin(), out.aggregate.end(),
                   [](const RankedControl& a, const RankedControl& b) { return a.magnitude > b.magnitude; });
  return out;
}

ControlRanking rank_controls(const VoltageSensitivity& s, const CurrentSensitivity& r,
                             const ViolationReport& violations, const Network& net,
                             const std::vector<std::string>& candidates) {
  return rank_controls(s, current_per_control(s, r, net), violations, net, candidates);
}

}  // namespace psopf
